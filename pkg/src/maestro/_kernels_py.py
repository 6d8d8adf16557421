"""Pure-Python/numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or ``MAESTRO_PURE_PYTHON=1``.
Every function here has a twin with the same signature in ``_kernels.pyx``.

Pose layout: ``(x0, y0, f0, x1, y1, f1)``; facing 0=N, 1=E, 2=S, 3=W; y grows
downward. Actions: 0=left, 1=right, 2=forward, 3=shoot, 4=noop.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

DX = (0, 1, 0, -1)
DY = (-1, 0, 1, 0)

OBS_EMPTY, OBS_WALL, OBS_SELF, OBS_OPPONENT, OBS_OOB = 0, 1, 2, 3, 4

_DX = np.array(DX, dtype=np.int64)
_DY = np.array(DY, dtype=np.int64)


def _blocked(walls, x, y):
    h, w = walls.shape
    return x < 0 or y < 0 or x >= w or y >= h or walls[y, x]


def _beam_hits(walls, sx, sy, f, tx, ty):
    dx, dy = DX[f], DY[f]
    x, y = sx + dx, sy + dy
    while not _blocked(walls, x, y):
        if x == tx and y == ty:
            return True
        x += dx
        y += dy
    return False


def lt_step(walls, pose, a0, a1):
    x0, y0, f0, x1, y1, f1 = pose
    if a0 == 0:
        f0 = (f0 + 3) % 4
    elif a0 == 1:
        f0 = (f0 + 1) % 4
    if a1 == 0:
        f1 = (f1 + 3) % 4
    elif a1 == 1:
        f1 = (f1 + 1) % 4

    nx0, ny0, nx1, ny1 = x0, y0, x1, y1
    if a0 == 2:
        tx, ty = x0 + DX[f0], y0 + DY[f0]
        if not _blocked(walls, tx, ty) and not (tx == x1 and ty == y1):
            nx0, ny0 = tx, ty
    if a1 == 2:
        tx, ty = x1 + DX[f1], y1 + DY[f1]
        if not _blocked(walls, tx, ty) and not (tx == x0 and ty == y0):
            nx1, ny1 = tx, ty
    if nx0 == nx1 and ny0 == ny1:
        nx0, ny0, nx1, ny1 = x0, y0, x1, y1

    hit0 = a0 == 3 and _beam_hits(walls, nx0, ny0, f0, nx1, ny1)
    hit1 = a1 == 3 and _beam_hits(walls, nx1, ny1, f1, nx0, ny0)
    return (nx0, ny0, f0, nx1, ny1, f1, int(hit0), int(hit1))


def lt_step_batch(walls, poses, a0, a1):
    poses = np.asarray(poses, dtype=np.int64)
    a0 = np.asarray(a0, dtype=np.int64)
    a1 = np.asarray(a1, dtype=np.int64)
    n = poses.shape[0]
    out = np.empty((n, 6), dtype=np.int64)
    hits = np.empty((n, 2), dtype=np.uint8)
    for k in range(n):
        r = lt_step(walls, tuple(int(v) for v in poses[k]), int(a0[k]), int(a1[k]))
        out[k] = r[:6]
        hits[k, 0] = r[6]
        hits[k, 1] = r[7]
    return out, hits


def lt_observe(walls, pose, agent):
    h, w = walls.shape
    if agent == 0:
        x, y, f, ox, oy = pose[0], pose[1], pose[2], pose[3], pose[4]
    else:
        x, y, f, ox, oy = pose[3], pose[4], pose[5], pose[0], pose[1]
    rf = (f + 1) % 4
    obs = np.empty((5, 5), dtype=np.uint8)
    for r in range(5):
        fwd = 4 - r
        for c in range(5):
            lat = c - 2
            cx = x + fwd * DX[f] + lat * DX[rf]
            cy = y + fwd * DY[f] + lat * DY[rf]
            if cx < 0 or cy < 0 or cx >= w or cy >= h:
                obs[r, c] = OBS_OOB
            elif walls[cy, cx]:
                obs[r, c] = OBS_WALL
            elif fwd == 0 and lat == 0:
                obs[r, c] = OBS_SELF
            elif cx == ox and cy == oy:
                obs[r, c] = OBS_OPPONENT
            else:
                obs[r, c] = OBS_EMPTY
    return obs


def lt_observe_batch(walls, poses, agent):
    """Vectorized observation of many poses for one agent index."""
    walls = np.asarray(walls, dtype=np.uint8)
    poses = np.asarray(poses, dtype=np.int64)
    h, w = walls.shape
    if agent == 0:
        x, y, f, ox, oy = poses[:, 0], poses[:, 1], poses[:, 2], poses[:, 3], poses[:, 4]
    else:
        x, y, f, ox, oy = poses[:, 3], poses[:, 4], poses[:, 5], poses[:, 0], poses[:, 1]
    rf = (f + 1) % 4
    fwd = (4 - np.arange(5))[:, None]
    lat = (np.arange(5) - 2)[None, :]
    cx = x[:, None, None] + fwd * _DX[f][:, None, None] + lat * _DX[rf][:, None, None]
    cy = y[:, None, None] + fwd * _DY[f][:, None, None] + lat * _DY[rf][:, None, None]
    oob = (cx < 0) | (cy < 0) | (cx >= w) | (cy >= h)
    wall = np.zeros_like(oob)
    inb = ~oob
    wall[inb] = walls[cy[inb], cx[inb]].astype(bool)
    obs = np.zeros(cx.shape, dtype=np.uint8)
    obs[(cx == ox[:, None, None]) & (cy == oy[:, None, None])] = OBS_OPPONENT
    obs[:, 4, 2] = OBS_SELF
    obs[wall] = OBS_WALL
    obs[oob] = OBS_OOB
    return obs


def gae_backward(rewards, values, dones, bootstrap, gamma, lam):
    n = len(rewards)
    adv = np.zeros(n, dtype=np.float64)
    last = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 0.0 if dones[t] else 1.0
        next_v = values[t + 1] if t + 1 < n else bootstrap
        delta = rewards[t] + gamma * next_v * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv


def bellman_q(next_state, reward, done, opp, gamma, values):
    """Q[s, a] = sum_b opp[s, b] * (r + gamma * (1 - done) * V[next])."""
    cont = reward + gamma * (1.0 - done) * values[next_state]
    return np.einsum("sab,sb->sa", cont, opp)


def vi_solve(next_state, reward, done, opp, gamma, tol, max_iters, values):
    """Value iteration to a Bellman residual of ``tol``.

    Returns ``(values, residual, sweeps)``. ``values`` is updated in place.
    """
    next_state = np.asarray(next_state)
    done = np.asarray(done, dtype=np.float64)
    residual = np.inf
    sweeps = 0
    while sweeps < max_iters:
        new = bellman_q(next_state, reward, done, opp, gamma, values).max(axis=1)
        residual = float(np.max(np.abs(new - values))) if len(values) else 0.0
        values[:] = new
        sweeps += 1
        if residual <= tol:
            break
    new = bellman_q(next_state, reward, done, opp, gamma, values).max(axis=1)
    residual = float(np.max(np.abs(new - values))) if len(values) else 0.0
    return values, residual, sweeps
