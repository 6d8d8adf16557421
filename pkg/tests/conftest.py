import numpy as np
import pytest

from maestro import kernels

KERNEL_NAMES = ("lt_step", "lt_step_batch", "lt_observe", "lt_observe_batch", "gae_backward", "bellman_q", "vi_solve")
BACKENDS = sorted(kernels.available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every kernel call through one backend for the duration of a test."""
    impl = kernels.available_backends()[request.param]
    for name in KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    monkeypatch.setattr(kernels, "BACKEND", impl.BACKEND)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
