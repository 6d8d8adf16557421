# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Semantics mirror ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

BACKEND = "cython"

cdef int DX[4]
cdef int DY[4]
DX[:] = [0, 1, 0, -1]
DY[:] = [-1, 0, 1, 0]

cdef enum:
    OBS_EMPTY = 0
    OBS_WALL = 1
    OBS_SELF = 2
    OBS_OPPONENT = 3
    OBS_OOB = 4


cdef inline bint _blocked(const unsigned char[:, ::1] walls, long x, long y) nogil:
    if x < 0 or y < 0 or y >= walls.shape[0] or x >= walls.shape[1]:
        return True
    return walls[y, x] != 0


cdef inline bint _beam_hits(const unsigned char[:, ::1] walls, long sx, long sy, long f,
                            long tx, long ty) nogil:
    cdef long dx = DX[f], dy = DY[f]
    cdef long x = sx + dx, y = sy + dy
    while not _blocked(walls, x, y):
        if x == tx and y == ty:
            return True
        x += dx
        y += dy
    return False


cdef inline void _step(const unsigned char[:, ::1] walls, const long* p, long a0, long a1,
                       long* out, unsigned char* hits) nogil:
    cdef long x0 = p[0], y0 = p[1], f0 = p[2], x1 = p[3], y1 = p[4], f1 = p[5]
    cdef long nx0, ny0, nx1, ny1, tx, ty
    if a0 == 0:
        f0 = (f0 + 3) % 4
    elif a0 == 1:
        f0 = (f0 + 1) % 4
    if a1 == 0:
        f1 = (f1 + 3) % 4
    elif a1 == 1:
        f1 = (f1 + 1) % 4
    nx0 = x0; ny0 = y0; nx1 = x1; ny1 = y1
    if a0 == 2:
        tx = x0 + DX[f0]; ty = y0 + DY[f0]
        if not _blocked(walls, tx, ty) and not (tx == x1 and ty == y1):
            nx0 = tx; ny0 = ty
    if a1 == 2:
        tx = x1 + DX[f1]; ty = y1 + DY[f1]
        if not _blocked(walls, tx, ty) and not (tx == x0 and ty == y0):
            nx1 = tx; ny1 = ty
    if nx0 == nx1 and ny0 == ny1:
        nx0 = x0; ny0 = y0; nx1 = x1; ny1 = y1
    hits[0] = a0 == 3 and _beam_hits(walls, nx0, ny0, f0, nx1, ny1)
    hits[1] = a1 == 3 and _beam_hits(walls, nx1, ny1, f1, nx0, ny0)
    out[0] = nx0; out[1] = ny0; out[2] = f0
    out[3] = nx1; out[4] = ny1; out[5] = f1


def lt_step(const unsigned char[:, ::1] walls, tuple pose, long a0, long a1):
    cdef long p[6]
    cdef long out[6]
    cdef unsigned char hits[2]
    cdef int i
    for i in range(6):
        p[i] = pose[i]
    _step(walls, p, a0, a1, out, hits)
    return (out[0], out[1], out[2], out[3], out[4], out[5], <int>hits[0], <int>hits[1])


def lt_step_batch(const unsigned char[:, ::1] walls, poses, a0, a1):
    cdef const long[:, ::1] P = np.ascontiguousarray(poses, dtype=np.int64)
    cdef const long[::1] A0 = np.ascontiguousarray(a0, dtype=np.int64)
    cdef const long[::1] A1 = np.ascontiguousarray(a1, dtype=np.int64)
    cdef Py_ssize_t n = P.shape[0], k
    out_arr = np.empty((n, 6), dtype=np.int64)
    hits_arr = np.empty((n, 2), dtype=np.uint8)
    cdef long[:, ::1] out = out_arr
    cdef unsigned char[:, ::1] hits = hits_arr
    with nogil:
        for k in range(n):
            _step(walls, &P[k, 0], A0[k], A1[k], &out[k, 0], &hits[k, 0])
    return out_arr, hits_arr


cdef inline void _observe(const unsigned char[:, ::1] walls, const long* pose, int agent,
                          unsigned char* obs) nogil:
    cdef long h = walls.shape[0], w = walls.shape[1]
    cdef long x, y, f, ox, oy, rf, r, c, fwd, lat, cx, cy
    cdef unsigned char code
    if agent == 0:
        x = pose[0]; y = pose[1]; f = pose[2]; ox = pose[3]; oy = pose[4]
    else:
        x = pose[3]; y = pose[4]; f = pose[5]; ox = pose[0]; oy = pose[1]
    rf = (f + 1) % 4
    for r in range(5):
        fwd = 4 - r
        for c in range(5):
            lat = c - 2
            cx = x + fwd * DX[f] + lat * DX[rf]
            cy = y + fwd * DY[f] + lat * DY[rf]
            if cx < 0 or cy < 0 or cx >= w or cy >= h:
                code = OBS_OOB
            elif walls[cy, cx]:
                code = OBS_WALL
            elif fwd == 0 and lat == 0:
                code = OBS_SELF
            elif cx == ox and cy == oy:
                code = OBS_OPPONENT
            else:
                code = OBS_EMPTY
            obs[r * 5 + c] = code


def lt_observe(const unsigned char[:, ::1] walls, pose, int agent):
    cdef long p[6]
    cdef int i
    for i in range(6):
        p[i] = pose[i]
    obs_arr = np.empty((5, 5), dtype=np.uint8)
    cdef unsigned char[:, ::1] obs = obs_arr
    _observe(walls, p, agent, &obs[0, 0])
    return obs_arr


def lt_observe_batch(const unsigned char[:, ::1] walls, poses, int agent):
    cdef const long[:, ::1] P = np.ascontiguousarray(poses, dtype=np.int64)
    cdef Py_ssize_t n = P.shape[0], k
    obs_arr = np.empty((n, 5, 5), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] obs = obs_arr
    with nogil:
        for k in range(n):
            _observe(walls, &P[k, 0], agent, &obs[k, 0, 0])
    return obs_arr


def gae_backward(const double[::1] rewards, const double[::1] values,
                 const unsigned char[::1] dones, double bootstrap, double gamma, double lam):
    cdef Py_ssize_t n = rewards.shape[0], t
    adv_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] adv = adv_arr
    cdef double last = 0.0, nonterminal, next_v, delta
    for t in range(n - 1, -1, -1):
        nonterminal = 0.0 if dones[t] else 1.0
        next_v = values[t + 1] if t + 1 < n else bootstrap
        delta = rewards[t] + gamma * next_v * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv_arr


cdef double _backup(const int[:, :, ::1] nxt, const double[:, :, ::1] rew,
                    const unsigned char[:, :, ::1] done, const double[:, ::1] opp,
                    double gamma, const double[::1] v, Py_ssize_t s) nogil:
    cdef Py_ssize_t a, b, na = nxt.shape[1], nb = nxt.shape[2]
    cdef double best = -1e300, q, cont
    for a in range(na):
        q = 0.0
        for b in range(nb):
            if opp[s, b] == 0.0:
                continue
            cont = rew[s, a, b]
            if not done[s, a, b]:
                cont = cont + gamma * v[nxt[s, a, b]]
            q += opp[s, b] * cont
        if q > best:
            best = q
    return best


def bellman_q(next_state, reward, done, opp, double gamma, values):
    cont = reward + gamma * (1.0 - np.asarray(done, dtype=np.float64)) * values[next_state]
    return np.einsum("sab,sb->sa", cont, opp)


def vi_solve(next_state, reward, done, opp, double gamma, double tol, long max_iters,
             double[::1] values):
    """Gauss-Seidel value iteration; the returned residual is a full Jacobi
    Bellman residual computed after the final sweep."""
    cdef const int[:, :, ::1] nxt = np.ascontiguousarray(next_state, dtype=np.int32)
    cdef const double[:, :, ::1] rew = np.ascontiguousarray(reward, dtype=np.float64)
    cdef const unsigned char[:, :, ::1] dn = np.ascontiguousarray(done, dtype=np.uint8)
    cdef const double[:, ::1] q = np.ascontiguousarray(opp, dtype=np.float64)
    cdef Py_ssize_t n = nxt.shape[0], s
    cdef long sweeps = 0
    cdef double change, new, residual = 1e300
    with nogil:
        while sweeps < max_iters:
            change = 0.0
            for s in range(n):
                new = _backup(nxt, rew, dn, q, gamma, values, s)
                if fabs(new - values[s]) > change:
                    change = fabs(new - values[s])
                values[s] = new
            sweeps += 1
            if change <= tol:
                residual = 0.0
                for s in range(n):
                    new = fabs(_backup(nxt, rew, dn, q, gamma, values, s) - values[s])
                    if new > residual:
                        residual = new
                if residual <= tol:
                    break
        residual = 0.0
        for s in range(n):
            new = fabs(_backup(nxt, rew, dn, q, gamma, values, s) - values[s])
            if new > residual:
                residual = new
    return np.asarray(values), residual, sweeps
