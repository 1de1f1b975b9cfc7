"""Exact dynamic programs for walks on a lattice, killed at the chamber walls.

Two arithmetic modes are provided.  The rational mode keeps a dict of
``Fraction`` weights and is exact; it is meant for small ``n`` and golden
tests.  The float mode pushes a dense weight box through the compiled (or
numpy) kernel ``dp_advance`` with compensated summation and scales to
``n`` in the thousands for ``k <= 3``.
"""
from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import backend as _backend
from . import chambers
from .chambers import ChamberType
from .errors import (
    BoundaryStartWarning,
    DegenerateConditioningError,
    InstanceTooLargeError,
    InvalidInputError,
)

__all__ = [
    "LatticeWalkSpec",
    "DPState",
    "DPResult",
    "VResult",
    "ConditionalLaw",
    "BruteForceResult",
    "run_dp",
    "run_dp_exact",
    "survival_probability",
    "restricted_expectation",
    "V_exact",
    "V_T_exact",
    "conditional_distribution",
    "brute_force_check",
    "write_dp_csv",
    "conditioned_scaled_moments",
    "ScaledMoments",
    "domination_ratios",
]

EXACT_AUTO_MAX_N = 20
BRUTE_FORCE_LIMIT = 10**8
DEFAULT_PRUNE = 1e-300
CHECKPOINT_EVERY = 500


@dataclass(frozen=True)
class LatticeWalkSpec:
    """Walk with iid integer-offset coordinates.

    Start points must lie on ``lattice_shift + Z^k``.
    """

    atoms: tuple[tuple[int, Fraction], ...]
    k: int
    lattice_shift: Fraction = Fraction(0)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")
        if not self.atoms:
            raise InvalidInputError("at least one atom is required")
        merged: dict[int, Fraction] = {}
        for a, p in self.atoms:
            if int(a) != a:
                raise InvalidInputError("lattice offsets must be integers")
            p = Fraction(p)
            if p <= 0:
                raise InvalidInputError("atom probabilities must be positive")
            merged[int(a)] = merged.get(int(a), Fraction(0)) + p
        if sum(merged.values()) != 1:
            raise InvalidInputError("atom probabilities must sum to 1 exactly")
        object.__setattr__(self, "atoms", tuple(sorted(merged.items())))
        object.__setattr__(self, "lattice_shift", Fraction(self.lattice_shift) % 1)

    @classmethod
    def rademacher(cls, k: int) -> "LatticeWalkSpec":
        return cls(((-1, Fraction(1, 2)), (1, Fraction(1, 2))), k)

    @classmethod
    def lazy(cls, k: int, p_zero: Fraction = Fraction(1, 2)) -> "LatticeWalkSpec":
        q = (1 - Fraction(p_zero)) / 2
        return cls(((-1, q), (0, Fraction(p_zero)), (1, q)), k)

    @classmethod
    def from_step_distribution(cls, dist) -> "LatticeWalkSpec":
        """Convert an iid discrete :class:`~weylwalk.walk.StepDistribution`."""
        if not (dist.is_discrete and dist.is_iid):
            raise InvalidInputError("only iid discrete laws have a lattice DP")
        atoms = []
        for v, p in dist.atoms:
            if v.denominator != 1:
                raise InvalidInputError("atoms must be integers for the lattice DP")
            atoms.append((int(v), p))
        return cls(tuple(atoms), dist.k)

    def with_k(self, k: int) -> "LatticeWalkSpec":
        return LatticeWalkSpec(self.atoms, k, self.lattice_shift)

    def joint_steps(self) -> list[tuple[tuple[int, ...], Fraction]]:
        out = []
        for combo in itertools.product(self.atoms, repeat=self.k):
            p = Fraction(1)
            for _, q in combo:
                p *= q
            out.append((tuple(a for a, _ in combo), p))
        return out

    def check_point(self, x) -> tuple[Fraction, ...]:
        pt = tuple(Fraction(c) for c in chambers.as_point(x))
        if len(pt) != self.k:
            raise InvalidInputError(f"point has {len(pt)} coordinates, expected {self.k}")
        for c in pt:
            if (c - self.lattice_shift).denominator != 1:
                raise InvalidInputError(f"coordinate {c} is off the lattice {self.lattice_shift} + Z")
        return pt

    def fingerprint(self) -> str:
        doc = {"atoms": [[a, p.numerator, p.denominator] for a, p in self.atoms], "k": self.k,
               "shift": [self.lattice_shift.numerator, self.lattice_shift.denominator]}
        return json.dumps(doc, sort_keys=True)


@dataclass
class DPState:
    """Surviving weights after ``step_index`` steps (rational mode)."""

    support: dict[tuple, Fraction]
    step_index: int = 0

    @property
    def mass(self) -> Fraction:
        return sum(self.support.values(), Fraction(0))


# rational mode --------------------------------------------------------------


@dataclass
class ExactRun:
    """Per-step exact quantities; index ``t`` refers to time ``t``."""

    surv: list[Fraction]
    surv_h: list[Fraction]
    exit_mass: list[Fraction]
    exit_h: list[Fraction]
    state: DPState


def run_dp_exact(spec: LatticeWalkSpec, chamber: ChamberType | str, x, n: int,
                 f: Callable | None = None, alive: Callable | None = None) -> ExactRun:
    """Rational DP; ``exit_*[t]`` is the mass (and ``f`` sum) killed at step ``t``.

    ``f`` defaults to the chamber's ``h``; ``alive`` defaults to chamber
    membership and may be replaced (e.g. by ``h > 0``).
    """
    z = ChamberType.parse(chamber)
    x = spec.check_point(x)
    if f is None:
        f = lambda y: chambers.h(z, y)  # noqa: E731
    if alive is None:
        alive = lambda y: chambers.contains(z, y)  # noqa: E731
    steps = spec.joint_steps()
    if not alive(x):
        zero = Fraction(0)
        return ExactRun([zero] * (n + 1), [zero] * (n + 1), [Fraction(1)] + [zero] * n,
                        [Fraction(f(x))] + [zero] * n, DPState({}, 0))
    support = {x: Fraction(1)}
    surv, surv_h = [Fraction(1)], [Fraction(f(x))]
    exit_mass, exit_h = [Fraction(0)], [Fraction(0)]
    for t in range(1, n + 1):
        nxt: dict[tuple, Fraction] = {}
        em, eh = Fraction(0), Fraction(0)
        for y, w in support.items():
            for s, p in steps:
                yy = tuple(a + b for a, b in zip(y, s))
                nxt[yy] = nxt.get(yy, Fraction(0)) + w * p
        support = {}
        for y, w in nxt.items():
            if alive(y):
                support[y] = w
            else:
                em += w
                eh += w * f(y)
        surv.append(sum(support.values(), Fraction(0)))
        surv_h.append(sum((w * f(y) for y, w in support.items()), Fraction(0)))
        exit_mass.append(em)
        exit_h.append(eh)
    return ExactRun(surv, surv_h, exit_mass, exit_h, DPState(support, n))


# float mode ----------------------------------------------------------------------


@dataclass
class DPResult:
    """Float-mode DP output.

    Arrays are indexed by time ``t = 0..n``; ``exit_*`` hold the mass (and
    ``h`` sum) killed exactly at step ``t`` and ``dropped`` the pruned mass.
    The final surviving weights live on the box ``W`` whose index ``m``
    maps to the real coordinate ``(base + d*(lo + m)) / scale``.
    """

    chamber: ChamberType
    x: tuple
    n: int
    surv: np.ndarray
    surv_h: np.ndarray
    exit_mass: np.ndarray
    exit_h: np.ndarray
    dropped: np.ndarray
    W: np.ndarray
    lo: np.ndarray
    base: np.ndarray
    d: int
    scale: int
    h_degree: int
    backend: str
    meta: dict = field(default_factory=dict)

    @property
    def h0(self) -> float:
        return float(self.surv_h[0])

    def identity_values(self) -> np.ndarray:
        """``h(x) - E[h(S(tau)); tau <= n]`` for each ``n``."""
        return self.h0 - np.array([math.fsum(self.exit_h[: t + 1]) for t in range(self.n + 1)])

    def mass_defect(self) -> float:
        """``|P(tau>n) + P(tau<=n) + dropped - 1|`` at the final step."""
        return abs(math.fsum([self.surv[-1], math.fsum(self.exit_mass), math.fsum(self.dropped), -1.0]))

    def error_bound(self) -> float:
        """Rounding bound on the survival probability (compensated sums)."""
        return (self.n + 1) * 8 * np.finfo(float).eps + float(math.fsum(self.dropped))

    def support(self, t: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Surviving lattice points ``(m, k)`` and their weights at time ``n``.

        Earlier times are available when they were requested as snapshots.
        """
        if t is None or t == self.n:
            return _support(self.W, self.lo, self.base, self.d, self.scale, len(self.x))
        snaps = self.meta.get("snapshots", {})
        if t not in snaps:
            raise InvalidInputError(f"no snapshot at t={t}")
        return snaps[t]


def _support(W, lo, base, d, scale, k):
    if W.size == 0:
        return np.zeros((0, k)), np.zeros(0)
    idx = np.nonzero(W)
    w = W[idx]
    pts = np.stack([(base[i] + d * (lo[i] + idx[i])) / scale for i in range(W.ndim)], axis=1)
    return pts.astype(np.float64), w


def _reduce(spec: LatticeWalkSpec, x: Sequence[Fraction]):
    offs = [a for a, _ in spec.atoms]
    a0 = min(offs)
    d = 0
    for a in offs:
        d = math.gcd(d, a - a0)
    d = d or 1
    rsteps = np.array([(a - a0) // d for a in offs], dtype=np.int64)
    probs = np.array([float(p) for _, p in spec.atoms])
    scale = 1
    for c in x:
        scale = math.lcm(scale, c.denominator)
    xi = [int(c * scale) for c in x]
    return a0 * scale, d * scale, rsteps, probs, scale, xi


def _fingerprint(spec, z, x, n_h, hz, prune) -> str:
    doc = [spec.fingerprint(), z.value, [str(c) for c in x], hz.value, repr(prune)]
    return hashlib.sha256(json.dumps(doc).encode()).hexdigest()[:16]


def run_dp(spec: LatticeWalkSpec, chamber: ChamberType | str, x, n: int, *,
           h_chamber: ChamberType | str | None = None, want_h: bool = True,
           prune: float = DEFAULT_PRUNE, checkpoint: str | Path | None = None,
           checkpoint_every: int = CHECKPOINT_EVERY, backend: str | None = None,
           snapshots: Sequence[int] = ()) -> DPResult:
    """Float-mode DP of the walk killed on leaving ``chamber``.

    With ``checkpoint`` set, the state is written to that ``.npz`` file every
    ``checkpoint_every`` steps and a matching file is resumed from.  The
    surviving support at each time in ``snapshots`` is kept in
    ``meta["snapshots"]``; snapshot times before a resumed checkpoint are lost.
    """
    z = ChamberType.parse(chamber)
    hz = z if h_chamber is None else ChamberType.parse(h_chamber)
    if n < 0:
        raise InvalidInputError("n must be >= 0")
    xq = spec.check_point(x)
    a0, d, rsteps, probs, scale, xi = _reduce(spec, xq)
    k = spec.k
    deg = chambers.degree(hz, k)
    h0 = float(chambers.h(hz, xq))
    inside = chambers.contains(z, xq)
    surv = np.zeros(n + 1)
    surv_h = np.zeros(n + 1)
    exit_mass = np.zeros(n + 1)
    exit_h = np.zeros(n + 1)
    dropped = np.zeros(n + 1)
    W = np.ones((1,) * k)
    lo = np.zeros(k, dtype=np.int64)
    t0 = 0
    if inside:
        surv[0], surv_h[0] = 1.0, h0
    else:
        exit_mass[0], exit_h[0] = 1.0, h0
        W = np.zeros((0,) * k)
    fp = _fingerprint(spec, z, xq, n, hz, prune)
    ck = Path(checkpoint) if checkpoint is not None else None
    if ck is not None and ck.exists():
        with np.load(ck) as data:
            if str(data["fingerprint"]) == fp and int(data["t"]) <= n:
                t0 = int(data["t"])
                W, lo = data["W"], data["lo"]
                for name, arr in (("surv", surv), ("surv_h", surv_h), ("exit_mass", exit_mass),
                                  ("exit_h", exit_h), ("dropped", dropped)):
                    arr[: t0 + 1] = data[name][: t0 + 1]
    mod = _backend.get_backend(backend)
    hscale = float(scale) ** deg
    snaps: dict = {}
    want_snaps = set(int(t) for t in snapshots)
    if 0 in want_snaps and t0 == 0:
        snaps[0] = _support(W, lo, np.array(xi, dtype=np.int64), d, scale, k)
    for t in range(t0 + 1, n + 1):
        if W.size == 0:
            break
        base = np.array([c + t * a0 for c in xi], dtype=np.int64)
        W, lo, st = _backend.dp_advance(W, lo, rsteps, probs, base, d, z.code, hz.code, want_h, prune,
                                        backend=backend)
        surv[t], surv_h[t] = st[0], st[1] / hscale
        exit_mass[t], exit_h[t] = st[2], st[3] / hscale
        dropped[t] = st[4]
        if t in want_snaps:
            snaps[t] = _support(W, lo, base, d, scale, k)
        if ck is not None and (t % checkpoint_every == 0 or t == n):
            tmp = ck.with_name(ck.name + ".tmp.npz")
            np.savez(tmp, fingerprint=fp, t=t, W=W, lo=lo, surv=surv, surv_h=surv_h,
                     exit_mass=exit_mass, exit_h=exit_h, dropped=dropped)
            tmp.replace(ck)
    base = np.array([c + n * a0 for c in xi], dtype=np.int64)
    return DPResult(z, xq, n, surv, surv_h, exit_mass, exit_h, dropped, W, lo, base, d, scale, deg,
                    mod.BACKEND_NAME, meta={"fingerprint": fp, "snapshots": snaps, "resumed_from": t0})


# user-facing queries ------------------------------------------------------------------


def _pick_mode(mode: str, n: int) -> str:
    if mode == "auto":
        return "exact" if n <= EXACT_AUTO_MAX_N else "float"
    if mode not in ("exact", "float"):
        raise InvalidInputError(f"unknown arithmetic mode {mode!r}")
    return mode


def _outside(z: ChamberType, xq) -> bool:
    if chambers.contains(z, xq):
        return False
    warnings.warn(f"start {tuple(map(str, xq))} is outside the open chamber {z.value}",
                  BoundaryStartWarning, stacklevel=3)
    return True


def survival_probability(spec: LatticeWalkSpec, chamber: ChamberType | str, x, n: int, mode: str = "auto"):
    """``P_x(tau > n)``; a ``Fraction`` in exact mode, a float otherwise.

    Starting outside the chamber warns with :class:`BoundaryStartWarning`
    and returns 0.
    """
    z = ChamberType.parse(chamber)
    xq = spec.check_point(x)
    mode = _pick_mode(mode, n)
    if _outside(z, xq):
        return Fraction(0) if mode == "exact" else 0.0
    if mode == "exact":
        return run_dp_exact(spec, z, xq, n).surv[n]
    return float(run_dp(spec, z, xq, n, want_h=False).surv[n])


def restricted_expectation(spec: LatticeWalkSpec, chamber: ChamberType | str, x, n: int,
                           f: Callable | None = None, mode: str = "auto"):
    """``E_x[f(S(n)); tau > n]``.

    ``f`` takes one point (a tuple of ``Fraction`` in exact mode) or, in
    float mode, an array of points of shape ``(m, k)``.  It defaults to the
    chamber's ``h``.
    """
    z = ChamberType.parse(chamber)
    xq = spec.check_point(x)
    mode = _pick_mode(mode, n)
    if _outside(z, xq):
        return Fraction(0) if mode == "exact" else 0.0
    if mode == "exact":
        run = run_dp_exact(spec, z, xq, n, f=f)
        return run.surv_h[n]
    res = run_dp(spec, z, xq, n, want_h=f is None)
    if f is None:
        return float(res.surv_h[n])
    pts, w = res.support()
    vals = np.asarray(f(pts), dtype=np.float64)
    return math.fsum(w * vals)


@dataclass
class VResult:
    """Truncated value of ``V`` plus convergence diagnostics."""

    value: float
    sequence: np.ndarray
    increments: np.ndarray
    identity_value: float
    converged: bool
    truncation_estimate: float
    dropped_mass: float
    n_max: int

    @property
    def extrapolated(self) -> float:
        """Value corrected by the ``n^(-1/2)`` truncation estimate."""
        return self.value + (self.value - self.sequence[self.n_max // 2]) / (math.sqrt(2.0) - 1.0)


def _diagnostics(seq, n_max):
    inc = np.diff(seq)
    if n_max >= 8:
        q = max(1, n_max // 4)
        late = np.mean(np.abs(inc[-q:]))
        early = np.mean(np.abs(inc[-2 * q : -q]))
        converged = bool(late <= early or late == 0.0)
    else:
        converged = bool(np.all(np.abs(inc[1:]) <= np.abs(inc[:-1]) + 1e-300)) if inc.size > 1 else True
    half = n_max // 2
    trunc = abs(seq[n_max] - seq[half]) / (math.sqrt(2.0) - 1.0) if n_max >= 2 else float("inf")
    return inc, converged, float(trunc)


def V_exact(spec: LatticeWalkSpec, chamber: ChamberType | str, x, n_max: int, mode: str = "float",
            **dp_kwargs) -> VResult:
    """``E_x[h(S(n_max)); tau > n_max]``, the truncated value of ``V``.

    ``truncation_estimate`` extrapolates ``|V_n - V_(n/2)|`` under an
    ``n^(-1/2)`` approach to the limit; ``converged`` is a flag, not a proof.
    """
    z = ChamberType.parse(chamber)
    xq = spec.check_point(x)
    if not chambers.contains(z, xq):
        raise InvalidInputError("V is defined for starts inside the open chamber")
    mode = _pick_mode(mode, n_max)
    if mode == "exact":
        run = run_dp_exact(spec, z, xq, n_max)
        seq = np.array([float(v) for v in run.surv_h])
        ident = float(run.surv_h[0] - sum(run.exit_h, Fraction(0)))
        dropped = 0.0
    else:
        res = run_dp(spec, z, xq, n_max, **dp_kwargs)
        seq = res.surv_h.copy()
        ident = float(res.identity_values()[-1])
        dropped = float(math.fsum(res.dropped))
    inc, conv, trunc = _diagnostics(seq, n_max)
    return VResult(float(seq[n_max]), seq, inc, ident, conv, trunc, dropped, n_max)


def V_T_exact(spec: LatticeWalkSpec, chamber: ChamberType | str, x, n: int) -> list[Fraction]:
    """Diagnostic ``E_x[h(S(m)); T > m]`` for ``m = 0..n`` with ``T`` the sign time."""
    z = ChamberType.parse(chamber)
    run = run_dp_exact(spec, z, x, n, alive=lambda y: chambers.h(z, y) > 0)
    return run.surv_h


def domination_ratios(spec: LatticeWalkSpec, chamber: ChamberType | str, points, n_max: int,
                      t: float = 2.0) -> np.ndarray:
    """``V_(n_max)(x) / h_t(x)`` at each point; their maximum is a fitted ``c`` in ``V <= c h_t``."""
    z = ChamberType.parse(chamber)
    out = []
    for x in points:
        v = V_exact(spec, z, x, n_max).value
        out.append(v / float(chambers.h_smoothed(z, t, spec.check_point(x))))
    return np.array(out)


@dataclass
class ConditionalLaw:
    """Law of ``S(n)`` given ``tau > n`` on its lattice support."""

    points: np.ndarray
    probs: np.ndarray
    exact: dict | None = None

    def mean(self, f: Callable | None = None) -> float:
        vals = self.points if f is None else np.asarray(f(self.points))
        if vals.ndim == 1:
            return math.fsum(self.probs * vals)
        return np.array([math.fsum(self.probs * vals[:, i]) for i in range(vals.shape[1])])


def conditional_distribution(spec: LatticeWalkSpec, chamber: ChamberType | str, x, n: int,
                             mode: str = "auto") -> ConditionalLaw:
    z = ChamberType.parse(chamber)
    xq = spec.check_point(x)
    mode = _pick_mode(mode, n)
    if mode == "exact":
        run = run_dp_exact(spec, z, xq, n)
        mass = run.surv[n]
        if mass == 0:
            raise DegenerateConditioningError("the walk cannot survive that long")
        law = {y: w / mass for y, w in sorted(run.state.support.items())}
        pts = np.array([[float(c) for c in y] for y in law]).reshape(-1, spec.k)
        return ConditionalLaw(pts, np.array([float(p) for p in law.values()]), law)
    res = run_dp(spec, z, xq, n, want_h=False)
    pts, w = res.support()
    total = math.fsum(w)
    if total == 0.0:
        raise DegenerateConditioningError("the walk cannot survive that long")
    return ConditionalLaw(pts, w / total)


@dataclass
class BruteForceResult:
    survival: Fraction
    restricted_h: Fraction
    exit_h: Fraction
    law: dict


def brute_force_check(spec: LatticeWalkSpec, chamber: ChamberType | str, x, n: int) -> BruteForceResult:
    """Enumerate every step sequence of length ``n`` (independent of the DP).

    A sequence is cut short once it leaves the chamber; the weight of all its
    continuations is booked at the exit point.
    """
    z = ChamberType.parse(chamber)
    xq = spec.check_point(x)
    if len(spec.atoms) ** (spec.k * n) > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(f"{len(spec.atoms)}^({spec.k}*{n}) paths exceed {BRUTE_FORCE_LIMIT}")
    steps = spec.joint_steps()
    law: dict[tuple, Fraction] = {}
    exit_h = Fraction(0)

    def walk(y, w, m):
        nonlocal exit_h
        if not chambers.contains(z, y):
            exit_h += w * chambers.h(z, y)
            return
        if m == n:
            law[y] = law.get(y, Fraction(0)) + w
            return
        for s, p in steps:
            walk(tuple(a + b for a, b in zip(y, s)), w * p, m + 1)

    walk(xq, Fraction(1), 0)
    surv = sum(law.values(), Fraction(0))
    rh = sum((w * chambers.h(z, y) for y, w in law.items()), Fraction(0))
    return BruteForceResult(surv, rh, exit_h, law)


def write_dp_csv(res: DPResult, path: str | Path, every: int = 1) -> None:
    """Rows ``n, P_survive, E_h_restricted, V_estimate, dropped_mass``.

    ``V_estimate`` is the identity value ``h(x) - E[h(S(tau)); tau <= n]``.
    """
    ident = res.identity_values()
    drop = np.cumsum(res.dropped)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "P_survive", "E_h_restricted", "V_estimate", "dropped_mass"])
        for t in range(0, res.n + 1, every):
            w.writerow([t, repr(float(res.surv[t])), repr(float(res.surv_h[t])), repr(float(ident[t])),
                        repr(float(drop[t]))])


@dataclass
class ScaledMoments:
    """Moments of ``S(n)/sqrt(n)`` given ``tau > n``, with a truncation error.

    ``error`` is ``|m(n) - m(n/2)| / (sqrt(2) - 1)``, the distance to the
    limit under an ``n^(-1/2)`` approach; ``extrapolated`` applies it.
    """

    n: int
    mean: np.ndarray
    abs2: float
    mean_half: np.ndarray
    abs2_half: float

    @staticmethod
    def _extra(a, b):
        return a + (a - b) / (math.sqrt(2.0) - 1.0)

    @property
    def mean_error(self) -> np.ndarray:
        return np.abs(self.mean - self.mean_half) / (math.sqrt(2.0) - 1.0)

    @property
    def abs2_error(self) -> float:
        return abs(self.abs2 - self.abs2_half) / (math.sqrt(2.0) - 1.0)

    @property
    def mean_extrapolated(self) -> np.ndarray:
        return self._extra(self.mean, self.mean_half)

    @property
    def abs2_extrapolated(self) -> float:
        return float(self._extra(self.abs2, self.abs2_half))


def conditioned_scaled_moments(spec: LatticeWalkSpec, chamber: ChamberType | str, x, n: int,
                               **dp_kwargs) -> ScaledMoments:
    """First moments and ``E|y|^2`` of ``S(n)/sqrt(n)`` under ``P_x(. | tau > n)``.

    The half-horizon is rounded to the parity of ``n`` so both times sit on
    the same lattice class.
    """
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    half = n // 2
    if (n - half) % 2:
        half -= 1
    res = run_dp(spec, chamber, x, n, want_h=False, snapshots=[half], **dp_kwargs)

    def moments(t):
        pts, w = res.support(t)
        tot = math.fsum(w)
        if tot == 0.0:
            raise DegenerateConditioningError("no surviving mass")
        y = pts / math.sqrt(t)
        mean = np.array([math.fsum(w * y[:, i]) / tot for i in range(y.shape[1])])
        return mean, math.fsum(w * np.sum(y * y, axis=1)) / tot

    m1, a1 = moments(n)
    m0, a0 = moments(half)
    return ScaledMoments(n, m1, a1, m0, a0)
