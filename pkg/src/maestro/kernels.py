"""Backend selection for the hot kernels.

The compiled extension is preferred; set ``MAESTRO_PURE_PYTHON=1`` to force
the numpy fallback (the test-suite runs both).
"""
from __future__ import annotations

import os

if os.environ.get("MAESTRO_PURE_PYTHON") == "1":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

BACKEND: str = _impl.BACKEND

lt_step = _impl.lt_step
lt_step_batch = _impl.lt_step_batch
lt_observe = _impl.lt_observe
lt_observe_batch = _impl.lt_observe_batch
gae_backward = _impl.gae_backward
bellman_q = _impl.bellman_q
vi_solve = _impl.vi_solve


def available_backends() -> dict:
    """Map backend name to module, for benchmarks and equivalence tests."""
    from . import _kernels_py

    found = {"python": _kernels_py}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
