"""Chunked, deterministic Monte Carlo of chamber exit times.

Trajectory ``i`` always consumes the random stream ``(seed, i, substream)``
and the work is cut into fixed chunks of trajectory indices, so results
are bit-identical for any worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _fallback, backend as _backend
from .chambers import ChamberType
from .errors import InvalidInputError
from .rng import key_from_seed
from .walk import StepDistribution

__all__ = ["ExitSample", "simulate_exits", "survival_curve", "DEFAULT_CHUNK"]

DEFAULT_CHUNK = 16384


@dataclass
class ExitSample:
    """Exit indices (``-1`` for survivors) and positions at exit or horizon."""

    tau: np.ndarray
    pos: np.ndarray
    horizon: int
    seed: int
    substream: int

    @property
    def n_samples(self) -> int:
        return int(self.tau.shape[0])

    @property
    def survived(self) -> np.ndarray:
        return self.tau < 0


def _chunk(args):
    dist, code, x, horizon, seed, substream, first, count, backend = args
    k0, k1 = key_from_seed(seed)
    if dist.is_discrete:
        values, cum, iid = dist.sampling_arrays()
        return _backend.mc_exit_discrete(values, cum, iid, code, x, horizon, k0, k1,
                                         substream, first, count, backend=backend)
    kind = 0 if dist.kind == "gaussian" else 1
    return _fallback.mc_exit_continuous(kind, dist.scale, code, x, horizon, k0, k1,
                                        substream, first, count)


def simulate_exits(dist: StepDistribution, chamber: ChamberType | str | None, x, horizon: int,
                   samples: int, seed: int = 0, substream: int = 0, workers: int = 1,
                   backend: str | None = None, chunk: int = DEFAULT_CHUNK) -> ExitSample:
    """Simulate ``samples`` walks from ``x`` until exit or ``horizon``.

    ``chamber=None`` runs the free walk for ``horizon`` steps.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dist.k,):
        raise InvalidInputError("start point dimension does not match the step law")
    if horizon < 0 or samples < 1:
        raise InvalidInputError("horizon must be >= 0 and samples >= 1")
    if workers < 1:
        raise InvalidInputError("workers must be >= 1")
    code = 3 if chamber is None else ChamberType.parse(chamber).code
    tasks = [
        (dist, code, x, int(horizon), int(seed), int(substream), first, min(chunk, samples - first), backend)
        for first in range(0, samples, chunk)
    ]
    if workers == 1 or len(tasks) == 1:
        parts = [_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            parts = list(pool.map(_chunk, tasks))
    tau = np.concatenate([p[0] for p in parts])
    pos = np.concatenate([p[1] for p in parts])
    return ExitSample(tau=tau, pos=pos, horizon=int(horizon), seed=int(seed), substream=int(substream))


def survival_curve(sample: ExitSample, ns) -> tuple[np.ndarray, np.ndarray]:
    """``P(tau > n)`` and its binomial standard error for each ``n``."""
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size and ns.max() > sample.horizon:
        raise InvalidInputError("n beyond the simulated horizon")
    tau = np.where(sample.tau < 0, np.iinfo(np.int64).max, sample.tau)
    st = np.sort(tau)
    alive = sample.n_samples - np.searchsorted(st, ns, side="right")
    p = alive / sample.n_samples
    se = np.sqrt(p * (1.0 - p) / sample.n_samples)
    return p, se


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
