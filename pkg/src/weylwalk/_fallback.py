"""Pure numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` module.  Monte
Carlo output is bit-identical between the two (integer decisions on the
same Philox words); dynamic-programming sums agree to rounding.
"""
from __future__ import annotations

import numpy as np

from .rng import philox4x64, words_to_uniform, uniforms_to_normal

BACKEND_NAME = "python"

# chamber codes shared with the compiled module
CODE_A, CODE_C, CODE_D, CODE_NONE = 0, 1, 2, 3


def contains_rows(code: int, pos: np.ndarray) -> np.ndarray:
    """Chamber membership for each row of ``pos`` (shape ``(m, k)``)."""
    k = pos.shape[1]
    ok = np.ones(pos.shape[0], dtype=bool)
    if code == CODE_NONE:
        return ok
    start = 0
    if code == CODE_C:
        ok &= pos[:, 0] > 0
    elif code == CODE_D:
        ok &= np.abs(pos[:, 0]) < pos[:, 1]
        start = 1
    for i in range(start, k - 1):
        ok &= pos[:, i] < pos[:, i + 1]
    return ok


def h_rows(code: int, cols) -> np.ndarray:
    k = len(cols)
    out = np.ones_like(cols[0], dtype=np.float64)
    if code == CODE_A:
        for i in range(k):
            for j in range(i + 1, k):
                out = out * (cols[j] - cols[i])
        return out
    for i in range(k):
        for j in range(i + 1, k):
            out = out * (cols[j] * cols[j] - cols[i] * cols[i])
    if code == CODE_C:
        for c in cols:
            out = out * c
    return out


class _WordCache:
    """Philox words for a fixed set of trajectories, one block at a time."""

    def __init__(self, k0, k1, substream, traj):
        self.k0, self.k1, self.sub, self.traj = k0, k1, substream, traj
        self.block = -1
        self.out = None

    def lane(self, w: int, rows=None) -> np.ndarray:
        block, lane = divmod(w, 4)
        if block != self.block:
            self.out = philox4x64(block, self.traj, self.sub, 0, self.k0, self.k1)
            self.block = block
        v = self.out[lane]
        return v if rows is None else v[rows]


def mc_exit_discrete(values, cum, iid, code, x, horizon, k0, k1, substream, traj0, ntraj):
    """Run ``ntraj`` walks until they leave the chamber or reach ``horizon``.

    ``values`` is ``(m,)`` (iid coordinates, one word per coordinate) or
    ``(m, k)`` (joint table, one word per step).  Returns ``tau`` (-1 when
    the walk survives the horizon) and the position at ``tau`` (or at the
    horizon).
    """
    values = np.asarray(values, dtype=np.float64)
    cum = np.asarray(cum, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    k = x.shape[0]
    pos = np.tile(x, (ntraj, 1))
    tau = np.full(ntraj, -1, dtype=np.int64)
    inside = contains_rows(code, pos)
    tau[~inside] = 0
    alive = np.nonzero(inside)[0]
    traj = np.arange(traj0, traj0 + ntraj, dtype=np.uint64)
    cache = _WordCache(k0, k1, substream, traj)
    for m in range(horizon):
        if alive.size == 0:
            break
        if iid:
            for j in range(k):
                u = words_to_uniform(cache.lane(m * k + j, alive))
                pos[alive, j] += values[np.searchsorted(cum, u, side="right")]
        else:
            u = words_to_uniform(cache.lane(m, alive))
            pos[alive] += values[np.searchsorted(cum, u, side="right")]
        out = ~contains_rows(code, pos[alive])
        tau[alive[out]] = m + 1
        alive = alive[~out]
    return tau, pos


def mc_exit_continuous(kind, scale, code, x, horizon, k0, k1, substream, traj0, ntraj):
    """As :func:`mc_exit_discrete` for gaussian (kind 0) or uniform (kind 1) steps.

    Coordinate ``j`` of step ``m`` uses words ``2w, 2w+1`` with
    ``w = m*k + j`` (gaussian) or word ``w`` (uniform).
    """
    x = np.asarray(x, dtype=np.float64)
    k = x.shape[0]
    pos = np.tile(x, (ntraj, 1))
    tau = np.full(ntraj, -1, dtype=np.int64)
    inside = contains_rows(code, pos)
    tau[~inside] = 0
    alive = np.nonzero(inside)[0]
    traj = np.arange(traj0, traj0 + ntraj, dtype=np.uint64)
    cache = _WordCache(k0, k1, substream, traj)
    for m in range(horizon):
        if alive.size == 0:
            break
        for j in range(k):
            w = m * k + j
            if kind == 0:
                u1 = words_to_uniform(cache.lane(2 * w, alive))
                u2 = words_to_uniform(cache.lane(2 * w + 1, alive))
                pos[alive, j] += scale * uniforms_to_normal(u1, u2)
            else:
                u = words_to_uniform(cache.lane(w, alive))
                pos[alive, j] += scale * (2.0 * u - 1.0)
        out = ~contains_rows(code, pos[alive])
        tau[alive[out]] = m + 1
        alive = alive[~out]
    return tau, pos


def _coord_grid(base, d, lo, shape):
    k = len(shape)
    cols = []
    for i in range(k):
        v = (base[i] + d * (lo[i] + np.arange(shape[i], dtype=np.int64))).astype(np.float64)
        sh = [1] * k
        sh[i] = shape[i]
        cols.append(v.reshape(sh))
    return cols


def _mask(code, cols, shape):
    ok = np.ones(shape, dtype=bool)
    if code == CODE_NONE:
        return ok
    k = len(cols)
    start = 0
    if code == CODE_C:
        ok &= cols[0] > 0
    elif code == CODE_D:
        ok &= np.abs(cols[0]) < cols[1]
        start = 1
    for i in range(start, k - 1):
        ok &= cols[i] < cols[i + 1]
    return ok


def dp_advance(W, lo, rsteps, probs, base, d, code, hcode, want_h, prune):
    """One step of the killed-walk dynamic program.

    ``W`` holds surviving weights at time t on the reduced-index box
    starting at ``lo``; the real coordinate of index ``m`` at time t+1 is
    ``base + d*m``.  Returns the trimmed new box, its origin and the stats
    ``[surv_mass, surv_h, exit_mass, exit_h, dropped]``.
    """
    k = W.ndim
    rsteps = np.asarray(rsteps, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    rmax = int(rsteps.max())
    cur = W
    for ax in range(k):
        shape = list(cur.shape)
        shape[ax] += rmax
        nxt = np.zeros(shape)
        for r, p in zip(rsteps, probs):
            sl = [slice(None)] * k
            sl[ax] = slice(int(r), int(r) + cur.shape[ax])
            nxt[tuple(sl)] += p * cur
        cur = nxt
    shape = cur.shape
    cols = _coord_grid(base, d, lo, shape)
    inside = _mask(code, cols, shape)
    stats = np.zeros(5)
    out = cur[~inside]
    stats[2] = out.sum()
    if want_h:
        hv = np.broadcast_to(h_rows(hcode, cols), shape)
        stats[3] = (cur * hv)[~inside].sum()
    cur = np.where(inside, cur, 0.0)
    if prune > 0:
        tiny = (cur > 0) & (cur < prune)
        if tiny.any():
            stats[4] = cur[tiny].sum()
            cur = np.where(tiny, 0.0, cur)
    stats[0] = cur.sum()
    if want_h:
        stats[1] = (cur * hv).sum()
    lo = np.array(lo, dtype=np.int64)
    if stats[0] == 0.0 and not (cur > 0).any():
        return np.zeros((0,) * k), lo, stats
    nz = cur != 0
    sl = []
    for ax in range(k):
        prof = nz.any(axis=tuple(a for a in range(k) if a != ax))
        idx = np.nonzero(prof)[0]
        a, b = int(idx[0]), int(idx[-1]) + 1
        sl.append(slice(a, b))
        lo[ax] += a
    return np.ascontiguousarray(cur[tuple(sl)]), lo, stats
