"""Doob h-transforms of killed walks and the functions used as transforms.

``V`` is approximated in three ways: by Monte Carlo of the stopped value
``h(x) - E_x[h(S(tau)); tau <= N]``, by the float DP of :mod:`weylwalk.exact`,
and by a table that solves the killed harmonic equation exactly on a finite
window with ``h`` as boundary data outside it.  The table is regular by
construction, which is what the Doob kernel needs.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import chambers, exact
from .chambers import ChamberType
from .errors import (
    DegenerateConditioningError,
    InvalidInputError,
    NumericalContractError,
    UnsupportedError,
)
from .exact import LatticeWalkSpec
from .montecarlo import simulate_exits
from .rng import RandomStream, key_from_seed, philox4x64, words_to_uniform
from .walk import PathSample, StepDistribution

__all__ = [
    "HFunction",
    "EstimateWithError",
    "VTable",
    "build_V_table",
    "estimate_V_mc",
    "default_horizon",
    "doob_kernel",
    "doob_step",
    "sample_conditioned_path",
    "transform_marginal",
    "conditioning_tv",
    "one_dim_V",
    "estimate_V_plus_A",
    "tilde_V_C",
    "tilde_regularity_residual",
    "estimate_record",
]

H_KINDS = ("h_Z", "V_exact_table", "V_mc_table", "tilde_V_C", "one_dim_V")


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    std_error: float
    n_samples: int
    truncation_horizon: int
    note: str = ""

    def __post_init__(self):
        if not self.std_error >= 0:
            raise InvalidInputError("std_error must be >= 0")
        if self.n_samples < 1:
            raise InvalidInputError("n_samples must be >= 1")

    def __mul__(self, other: "EstimateWithError") -> "EstimateWithError":
        # independent factors: relative errors add in quadrature
        v = self.value * other.value
        se = math.hypot(self.std_error * other.value, other.std_error * self.value)
        return EstimateWithError(v, se, max(self.n_samples, other.n_samples),
                                 max(self.truncation_horizon, other.truncation_horizon))


@dataclass
class HFunction:
    """A function used as a transform, with a positivity check on the chamber."""

    evaluator: Callable
    kind: str
    domain_chamber: ChamberType

    def __post_init__(self):
        if self.kind not in H_KINDS:
            raise InvalidInputError(f"unknown transform kind {self.kind!r}")
        self.domain_chamber = ChamberType.parse(self.domain_chamber)

    @classmethod
    def from_h(cls, chamber: ChamberType | str) -> "HFunction":
        z = ChamberType.parse(chamber)
        return cls(lambda y: chambers.h(z, y), "h_Z", z)

    def __call__(self, y):
        v = self.evaluator(y)
        if chambers.contains(self.domain_chamber, y) and not v > 0:
            raise NumericalContractError(f"transform {self.kind} is not positive at {tuple(y)}: {v}")
        return v


# V tables -------------------------------------------------------------------------


def _window_points(z: ChamberType, k: int, radius: int) -> np.ndarray:
    """Integer points of the chamber with every coordinate in ``[-radius, radius]``."""
    lo = 1 if z is ChamberType.C else -radius
    if k == 1:
        pts = np.arange(lo, radius + 1).reshape(-1, 1)
    else:
        grids = np.meshgrid(*([np.arange(lo, radius + 1)] * k), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
    return pts[chambers.contains(z, pts)]


@dataclass
class VTable:
    """``V`` on a window of lattice points; ``h`` outside it, 0 off the chamber."""

    chamber: ChamberType
    spec: LatticeWalkSpec
    radius: int
    points: np.ndarray
    values: np.ndarray
    switchover: float
    boundary_quality: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {tuple(int(c) for c in p): i for i, p in enumerate(self.points)}

    def __len__(self) -> int:
        return len(self._index)

    def in_window(self, y) -> bool:
        return tuple(int(c) for c in y) in self._index

    def __call__(self, y) -> float:
        key = tuple(int(c) for c in y)
        if any(c != int(c) for c in y):
            raise InvalidInputError(f"{tuple(y)} is off the integer lattice")
        i = self._index.get(key)
        if i is not None:
            return float(self.values[i])
        if not chambers.contains(self.chamber, key):
            return 0.0
        return float(chambers.h(self.chamber, key))

    def as_hfunction(self) -> HFunction:
        return HFunction(self, "V_exact_table", self.chamber)

    def regularity_residual(self, y) -> float:
        """Relative gap between the killed one-step mean of V and ``V(y)``."""
        v = self(y)
        s = math.fsum(float(p) * self(tuple(a + b for a, b in zip(y, st))) for st, p in self.spec.joint_steps())
        return abs(s - v) / abs(v)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(self.points.shape[1])] + ["V"])
            for p, v in zip(self.points, self.values):
                w.writerow([int(c) for c in p] + [repr(float(v))])


def build_V_table(spec: LatticeWalkSpec, chamber: ChamberType | str, radius: int | None = None,
                  switchover: float = 1.05) -> VTable:
    """Solve ``V(y) = E_y[V(S(1)); S(1) in W]`` on the window exactly.

    The window holds the chamber points with all coordinates in
    ``[-radius, radius]``; outside it ``V`` is replaced by ``h``.
    ``boundary_quality`` is the share of exterior neighbours with
    ``h_2/h < switchover``, i.e. where ``h`` is already a close proxy.
    """
    z = ChamberType.parse(chamber)
    if z is ChamberType.A:
        raise UnsupportedError("V tables cover the C and D chambers")
    if spec.lattice_shift != 0:
        raise UnsupportedError("V tables need an integer lattice")
    k = spec.k
    if radius is None:
        radius = 200 if k <= 2 else 40
    if radius < 2:
        raise InvalidInputError("radius must be >= 2")
    pts = _window_points(z, k, radius)
    index = {tuple(p): i for i, p in enumerate(pts.tolist())}
    steps = spec.joint_steps()
    N = len(pts)
    rows, cols, vals = [], [], []
    rhs = np.zeros(N)
    ext_total, ext_good = 0, 0
    seen_ext: set = set()
    for st, p in steps:
        pf = float(p)
        nb = pts + np.array(st, dtype=np.int64)
        inside = chambers.contains(z, nb)
        for i in np.nonzero(inside)[0]:
            key = tuple(nb[i].tolist())
            j = index.get(key)
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(pf)
            else:
                hv = float(chambers.h(z, key))
                rhs[i] += pf * hv
                if key not in seen_ext:
                    seen_ext.add(key)
                    ext_total += 1
                    ext_good += chambers.h_smoothed(z, 2, key) / hv < switchover
    P = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    A = sp.identity(N, format="csr") - P
    V = spla.spsolve(A.tocsc(), rhs)
    if not np.all(V > 0):
        raise NumericalContractError("V table has nonpositive entries")
    quality = ext_good / ext_total if ext_total else 1.0
    return VTable(z, spec, int(radius), pts, V, switchover, quality, meta={"size": N})


# Monte Carlo V --------------------------------------------------------------------


def default_horizon(x) -> int:
    """Ten times the squared norm of the start, at least 100."""
    r2 = float(sum(float(c) ** 2 for c in x))
    return max(100, int(math.ceil(10.0 * r2)))


def estimate_V_mc(dist: StepDistribution, chamber: ChamberType | str, x, horizon: int | None = None,
                  samples: int = 100_000, seed: int = 0, substream: int = 0, workers: int = 1,
                  backend: str | None = None) -> EstimateWithError:
    """Monte Carlo ``h(x) - E_x[h(S(tau)); tau <= horizon]``.

    Paths alive at the horizon contribute nothing to the exit term, so the
    target is the truncated value ``E_x[h(S(N)); tau > N]`` at ``N = horizon``.
    """
    z = ChamberType.parse(chamber)
    if not chambers.contains(z, tuple(x)):
        raise InvalidInputError("start must be inside the open chamber")
    horizon = default_horizon(x) if horizon is None else int(horizon)
    res = simulate_exits(dist, z, x, horizon, samples, seed=seed, substream=substream,
                         workers=workers, backend=backend)
    h0 = float(chambers.h(z, tuple(float(c) for c in x)))
    hexit = np.where(res.tau > 0, chambers.h(z, res.pos), 0.0)
    vals = h0 - hexit
    se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    alive = int(np.count_nonzero(res.tau < 0))
    return EstimateWithError(float(vals.mean()), se, samples, horizon,
                             note=f"{alive} of {samples} paths alive at the horizon")


# Doob kernel ----------------------------------------------------------------------------


def _joint(dist) -> list[tuple[tuple, Fraction]]:
    if isinstance(dist, LatticeWalkSpec):
        return dist.joint_steps()
    if isinstance(dist, StepDistribution):
        if not dist.is_discrete:
            raise UnsupportedError("Doob kernels are sampled for discrete laws only")
        return dist.joint_support()
    raise InvalidInputError("expected a StepDistribution or LatticeWalkSpec")


@dataclass
class DoobKernel:
    targets: list[tuple]
    masses: list
    residual: float


def doob_kernel(dist, chamber: ChamberType | str, V: Callable, x, exact_arith: bool = False) -> DoobKernel:
    """One-step masses ``p(xi) V(x+xi) / V(x)`` over in-chamber targets.

    ``residual`` is ``1 - sum(masses)``; it is zero when ``V`` is regular.
    The returned masses are renormalised unless ``exact_arith`` is set, in
    which case they are left as computed (rationals if ``V`` is rational).
    """
    z = ChamberType.parse(chamber)
    x = tuple(x)
    vx = V(x)
    if not vx > 0:
        raise NumericalContractError(f"transform is not positive at {x}")
    targets, masses = [], []
    for st, p in _joint(dist):
        y = tuple(a + b for a, b in zip(x, st))
        if not chambers.contains(z, y):
            continue
        vy = V(y)
        if vy < 0:
            raise NumericalContractError(f"transform is negative at {y}")
        if vy == 0:
            continue
        if exact_arith:
            targets.append(y)
            masses.append(p * vy / vx)
        else:
            targets.append(y)
            masses.append(float(p) * float(vy) / float(vx))
    if not targets:
        raise NumericalContractError(f"every move from {x} is killed; V is not regular there")
    total = sum(masses)
    residual = float(1 - total)
    if not exact_arith:
        masses = [m / total for m in masses]
    return DoobKernel(targets, masses, residual)


def doob_step(dist, chamber: ChamberType | str, V: Callable, x, stream: RandomStream, word: int = 0):
    """Sample one transformed step using word ``word`` of ``stream``."""
    ker = doob_kernel(dist, chamber, V, x)
    u = float(stream.uniforms(word, 1)[0])
    cum = np.cumsum(ker.masses)
    cum[-1] = 1.0
    j = int(np.searchsorted(cum, u, side="right"))
    return ker.targets[j], ker.residual


def sample_conditioned_path(dist, chamber: ChamberType | str, V: Callable, x, n: int,
                            stream: RandomStream) -> tuple[PathSample, list[float]]:
    """Chain ``n`` transformed steps; returns the path and per-step residuals."""
    cur = tuple(x)
    steps, residuals = [], []
    for m in range(n):
        nxt, r = doob_step(dist, chamber, V, cur, stream, word=m)
        steps.append(tuple(b - a for a, b in zip(cur, nxt)))
        residuals.append(r)
        cur = nxt
    k = len(cur)
    return PathSample(start=np.asarray(x, dtype=float), steps=np.asarray(steps, dtype=float).reshape(n, k)), residuals


def transform_marginal(dist, chamber: ChamberType | str, V: Callable, x, n: int, exact_arith: bool = False) -> dict:
    """Law of ``S(n)`` under the transform, by chaining one-step kernels.

    With ``exact_arith`` the unnormalised masses are propagated, which makes
    them equal to the killed masses times ``V(y)/V(x)`` exactly.
    """
    law = {tuple(x): Fraction(1) if exact_arith else 1.0}
    for _ in range(n):
        nxt: dict = {}
        for y, w in law.items():
            ker = doob_kernel(dist, chamber, V, y, exact_arith=exact_arith)
            for t, m in zip(ker.targets, ker.masses):
                nxt[t] = nxt.get(t, 0) + w * m
        law = nxt
    return law


def conditioning_tv(spec: LatticeWalkSpec, chamber: ChamberType | str, V: Callable, x, n: int, m: int) -> float:
    """Total variation between ``P_x(S(n) in . | tau > m)`` and the V-transform law at ``n``."""
    z = ChamberType.parse(chamber)
    if m < n:
        raise InvalidInputError("m must be >= n")
    run = exact.run_dp_exact(spec, z, x, n)
    cond: dict = {}
    for y, w in run.state.support.items():
        tail = exact.survival_probability(spec, z, y, m - n, mode="float") if m > n else 1.0
        cond[y] = float(w) * tail
    total = math.fsum(cond.values())
    if total == 0.0:
        raise DegenerateConditioningError("no mass survives to m")
    vx = float(V(tuple(x)))
    tr = {y: float(w) * float(V(y)) / vx for y, w in run.state.support.items()}
    ttot = math.fsum(tr.values())
    keys = set(cond) | set(tr)
    return 0.5 * math.fsum(abs(cond.get(y, 0.0) / total - tr.get(y, 0.0) / ttot) for y in keys)


# one-dimensional V and the alternate C transform --------------------------------------


def _is_skip_free_down(dist: StepDistribution) -> bool:
    m = dist.marginal()
    return all(v.denominator == 1 for v, _ in m) and min(v for v, _ in m) >= -1


def one_dim_V(dist: StepDistribution, z, horizon: int | None = None, samples: int = 100_000,
              seed: int = 0, substream: int = 0, radius: int = 400) -> EstimateWithError:
    """``V(z) = z - E_z[S(tau)]`` for the walk killed on leaving ``(0, inf)``.

    Integer walks that step down by at most one land exactly on 0, so
    ``V(z) = z``.  Other lattice walks use a one-dimensional V table and
    continuous laws use Monte Carlo.
    """
    if not z > 0:
        raise InvalidInputError("z must be positive")
    d1 = dist.with_k(1) if dist.k != 1 else dist
    if d1.is_discrete:
        if _is_skip_free_down(d1):
            if Fraction(z).denominator != 1:
                raise InvalidInputError("z must be an integer for an integer walk")
            return EstimateWithError(float(z), 0.0, 1, 0, note="exact: walk exits at 0")
        spec = LatticeWalkSpec.from_step_distribution(d1)
        table = _one_dim_table(spec, radius)
        return EstimateWithError(table(tuple([int(z)])), 0.0, 1, 0, note=f"V table radius {radius}")
    est = estimate_V_mc(d1, ChamberType.C, (float(z),), horizon=horizon, samples=samples, seed=seed,
                        substream=substream)
    return est


_TABLES: dict = {}


def _one_dim_table(spec: LatticeWalkSpec, radius: int) -> VTable:
    key = (spec.fingerprint(), radius)
    if key not in _TABLES:
        _TABLES[key] = build_V_table(spec.with_k(1), ChamberType.C, radius)
    return _TABLES[key]


def _one_dim_function(dist: StepDistribution, radius: int = 400) -> Callable[[np.ndarray], np.ndarray]:
    d1 = dist.with_k(1) if dist.k != 1 else dist
    if not d1.is_discrete:
        raise UnsupportedError("the product transform is sampled for discrete laws only")
    if _is_skip_free_down(d1):
        return lambda z: np.where(z > 0, z, 0.0)
    table = _one_dim_table(LatticeWalkSpec.from_step_distribution(d1), radius)

    def f(z):
        z = np.asarray(z)
        return np.vectorize(lambda c: table((int(c),)))(z).astype(float)

    return f


def estimate_V_plus_A(dist: StepDistribution, x, horizon: int | None = None, samples: int = 100_000,
                      seed: int = 0, substream: int = 0) -> EstimateWithError:
    """``h^A(x) - E^+_x[h^A(S(tau^A))]`` with the expectation under the product transform.

    Each coordinate moves independently as the one-dimensional walk
    transformed by ``V`` to stay positive; step ``m`` of coordinate ``j`` of
    trajectory ``i`` uses word ``m*k + j`` of the stream ``(seed, i, substream)``.
    """
    if not (dist.is_discrete and dist.is_iid):
        raise UnsupportedError("the product transform needs iid discrete coordinates")
    x = np.asarray(x, dtype=np.float64)
    k = x.shape[0]
    if not chambers.contains(ChamberType.C, x):
        raise InvalidInputError("start must lie in the C chamber")
    if k == 1:
        return EstimateWithError(1.0, 0.0, samples, 0, note="k = 1: empty product")
    horizon = default_horizon(x) if horizon is None else int(horizon)
    Vf = _one_dim_function(dist)
    vals = np.array([float(v) for v, _ in dist.atoms])
    probs = np.array([float(p) for _, p in dist.atoms])
    k0, k1 = key_from_seed(seed)
    traj = np.arange(samples, dtype=np.uint64)
    pos = np.tile(x, (samples, 1))
    tau = np.full(samples, -1, dtype=np.int64)
    alive = np.arange(samples)
    for m in range(horizon):
        if alive.size == 0:
            break
        for j in range(k):
            w = m * k + j
            block, lane = divmod(w, 4)
            u = words_to_uniform(philox4x64(block, traj[alive], substream, 0, k0, k1)[lane])
            z = pos[alive, j]
            cand = z[:, None] + vals[None, :]
            wts = probs[None, :] * Vf(cand) / Vf(z)[:, None]
            cum = np.cumsum(wts, axis=1)
            cum /= cum[:, -1:]
            cum[:, -1] = 1.0
            pick = (u[:, None] < cum).argmax(axis=1)
            pos[alive, j] = cand[np.arange(alive.size), pick]
        out = ~chambers.contains(ChamberType.A, pos[alive])
        tau[alive[out]] = m + 1
        alive = alive[~out]
    hA0 = float(chambers.h(ChamberType.A, tuple(x)))
    hexit = np.where(tau > 0, chambers.h(ChamberType.A, pos), 0.0)
    v = hA0 - hexit
    se = float(v.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return EstimateWithError(float(v.mean()), se, samples, horizon,
                             note=f"{int((tau < 0).sum())} of {samples} paths alive at the horizon")


def tilde_V_C(dist: StepDistribution, x, horizon: int | None = None, samples: int = 100_000,
              seed: int = 0, substream: int = 0) -> EstimateWithError:
    """The product ``V^{+,A}(x) * prod_i V(x_i)`` with propagated error."""
    est = estimate_V_plus_A(dist, x, horizon=horizon, samples=samples, seed=seed, substream=substream)
    for i, c in enumerate(x):
        est = est * one_dim_V(dist, c, horizon=horizon, samples=samples, seed=seed,
                              substream=substream + 1 + i)
    return est


@dataclass
class RegularityResidual:
    x: tuple
    residual: float
    std_error: float
    center: EstimateWithError
    neighbours: dict

    @property
    def z_score(self) -> float:
        return abs(self.residual) / self.std_error if self.std_error > 0 else math.inf


def tilde_regularity_residual(dist: StepDistribution, x, horizon: int | None = None,
                              samples: int = 100_000, seed: int = 0) -> RegularityResidual:
    """``E_x[V~(S(1)); tau^C > 1] - V~(x)`` with a combined standard error.

    Each point uses its own substream so the estimates are independent.
    """
    x = tuple(x)
    center = tilde_V_C(dist, x, horizon=horizon, samples=samples, seed=seed, substream=0)
    acc, var = [-center.value], center.std_error**2
    neigh = {}
    for i, (st, p) in enumerate(dist.joint_support()):
        y = tuple(a + float(b) for a, b in zip(x, st))
        if not chambers.contains(ChamberType.C, y):
            continue
        est = tilde_V_C(dist, y, horizon=horizon, samples=samples, seed=seed, substream=100 * (i + 1))
        neigh[y] = est
        acc.append(float(p) * est.value)
        var += (float(p) * est.std_error) ** 2
    return RegularityResidual(x, math.fsum(acc), math.sqrt(var), center, neigh)


def estimate_record(x, est: EstimateWithError, seed: int) -> dict:
    return {"schema": "weylwalk/1", "x": [float(c) for c in x], "estimate": est.value,
            "std_error": est.std_error, "horizon": est.truncation_horizon, "samples": est.n_samples,
            "seed": seed}


def write_records(records: Sequence[dict], path: str | Path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
