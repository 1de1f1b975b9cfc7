"""Step laws, assumption checks, path sampling and stopping times."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import chambers
from .chambers import ChamberType
from .errors import InvalidInputError, UnsupportedDistributionError
from .rng import RandomStream, philox4x64, key_from_seed, words_to_uniform, uniforms_to_normal

__all__ = [
    "StepDistribution",
    "AssumptionReport",
    "PathSample",
    "validate_assumptions",
    "required_moment_order",
    "sample_path",
    "sample_paths",
    "exit_time_tau",
    "sign_time_T",
    "entrance_time_nu",
    "annotate",
    "nu_exceedance_frequency",
    "load_step_distribution",
    "one_step_average",
]

KINDS = ("discrete-atoms", "gaussian", "uniform-symmetric")
COUPLINGS = ("iid-components", "exchangeable-given-table")


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return Fraction(int(v[0]), int(v[1]))
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**12)
    return Fraction(v)


@dataclass(frozen=True)
class StepDistribution:
    """Exchangeable law of one k-dimensional step.

    Discrete laws are either iid over coordinates (``atoms`` gives the
    one-dimensional marginal) or a joint ``table`` of k-vectors, which must
    be invariant under coordinate permutations.  ``scale`` is the standard
    deviation of a gaussian coordinate or the half-width of a uniform one.
    """

    kind: str
    k: int
    atoms: tuple[tuple[Fraction, Fraction], ...] | None = None
    coupling: str = "iid-components"
    table: tuple[tuple[tuple[Fraction, ...], Fraction], ...] | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedDistributionError(f"unknown step kind {self.kind!r}")
        if self.coupling not in COUPLINGS:
            raise InvalidInputError(f"unknown coupling {self.coupling!r}")
        if self.k < 1:
            raise InvalidInputError("dimension k must be >= 1")
        if self.kind != "discrete-atoms":
            if self.coupling != "iid-components":
                raise InvalidInputError("continuous laws are iid over coordinates")
            if not self.scale > 0:
                raise InvalidInputError("scale must be positive")
            return
        if self.coupling == "iid-components":
            if not self.atoms:
                raise InvalidInputError("discrete law needs atoms")
            atoms = tuple((_frac(v), _frac(p)) for v, p in self.atoms)
            if any(p <= 0 for _, p in atoms):
                raise InvalidInputError("atom probabilities must be positive")
            if sum(p for _, p in atoms) != 1:
                raise InvalidInputError("atom probabilities must sum to 1 exactly")
            object.__setattr__(self, "atoms", tuple(sorted(atoms)))
        else:
            if not self.table:
                raise InvalidInputError("exchangeable table is empty")
            merged: dict[tuple, Fraction] = {}
            for vec, p in self.table:
                vec = tuple(_frac(v) for v in vec)
                if len(vec) != self.k:
                    raise InvalidInputError("table row has wrong dimension")
                merged[vec] = merged.get(vec, Fraction(0)) + _frac(p)
            if any(p <= 0 for p in merged.values()):
                raise InvalidInputError("table probabilities must be positive")
            if sum(merged.values()) != 1:
                raise InvalidInputError("table probabilities must sum to 1 exactly")
            # exchangeability: every permutation of a row carries the same mass
            for vec, p in merged.items():
                for perm in set(itertools.permutations(vec)):
                    if merged.get(perm) != p:
                        raise InvalidInputError(f"table is not exchangeable at row {vec}")
            object.__setattr__(self, "table", tuple(sorted(merged.items())))

    # constructors -----------------------------------------------------------

    @classmethod
    def rademacher(cls, k: int) -> "StepDistribution":
        return cls("discrete-atoms", k, atoms=((Fraction(-1), Fraction(1, 2)), (Fraction(1), Fraction(1, 2))))

    @classmethod
    def lazy(cls, k: int, p_zero: Fraction = Fraction(1, 2)) -> "StepDistribution":
        p_zero = Fraction(p_zero)
        q = (1 - p_zero) / 2
        return cls("discrete-atoms", k, atoms=((Fraction(-1), q), (Fraction(0), p_zero), (Fraction(1), q)))

    @classmethod
    def from_atoms(cls, atoms: Iterable, k: int) -> "StepDistribution":
        return cls("discrete-atoms", k, atoms=tuple((_frac(v), _frac(p)) for v, p in atoms))

    @classmethod
    def from_table(cls, rows: Iterable, k: int) -> "StepDistribution":
        return cls("discrete-atoms", k, coupling="exchangeable-given-table",
                   table=tuple((tuple(v), p) for v, p in rows))

    @classmethod
    def gaussian(cls, k: int, scale: float = 1.0) -> "StepDistribution":
        return cls("gaussian", k, scale=scale)

    @classmethod
    def uniform(cls, k: int, half_width: float = math.sqrt(3.0)) -> "StepDistribution":
        return cls("uniform-symmetric", k, scale=half_width)

    # views ------------------------------------------------------------------

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete-atoms"

    @property
    def is_iid(self) -> bool:
        return self.coupling == "iid-components"

    def marginal(self) -> tuple[tuple[Fraction, Fraction], ...]:
        """One-dimensional marginal of a discrete law."""
        if not self.is_discrete:
            raise UnsupportedDistributionError("marginal atoms exist only for discrete laws")
        if self.is_iid:
            return self.atoms
        acc: dict[Fraction, Fraction] = {}
        for vec, p in self.table:
            acc[vec[0]] = acc.get(vec[0], Fraction(0)) + p
        return tuple(sorted(acc.items()))

    def joint_support(self) -> list[tuple[tuple[Fraction, ...], Fraction]]:
        """All k-dimensional steps with their probabilities."""
        if not self.is_discrete:
            raise UnsupportedDistributionError("joint support exists only for discrete laws")
        if not self.is_iid:
            return list(self.table)
        out = []
        for combo in itertools.product(self.atoms, repeat=self.k):
            p = Fraction(1)
            for _, q in combo:
                p *= q
            out.append((tuple(v for v, _ in combo), p))
        return out

    def moment(self, r: int):
        """``E[xi^r]`` of one coordinate; exact for discrete laws."""
        if self.is_discrete:
            return sum(p * v**r for v, p in self.marginal())
        if r % 2 == 1:
            return 0.0
        if self.kind == "gaussian":
            return self.scale**r * math.prod(range(r - 1, 0, -2))
        return self.scale**r / (r + 1)

    def sampling_arrays(self) -> tuple[np.ndarray, np.ndarray, bool]:
        """Values, cumulative probabilities and the iid flag used by samplers."""
        if not self.is_discrete:
            raise UnsupportedDistributionError("sampling arrays exist only for discrete laws")
        rows = self.atoms if self.is_iid else self.table
        if self.is_iid:
            values = np.array([float(v) for v, _ in rows])
        else:
            values = np.array([[float(c) for c in v] for v, _ in rows])
        acc = Fraction(0)
        cum = []
        for _, p in rows:
            acc += p
            cum.append(float(acc))
        cum[-1] = 1.0
        return values, np.array(cum), self.is_iid

    def is_conditionally_symmetric(self) -> bool:
        """Invariance under flipping the sign of any single coordinate."""
        if not self.is_discrete:
            return True
        if self.is_iid:
            m = dict(self.atoms)
            return all(m.get(-v) == p for v, p in m.items())
        t = dict(self.table)
        for vec, p in t.items():
            for i in range(self.k):
                flipped = vec[:i] + (-vec[i],) + vec[i + 1:]
                if t.get(flipped) != p:
                    return False
        return True

    # serialisation -----------------------------------------------------------

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind, "k": self.k}
        if self.is_discrete and self.is_iid:
            d["atoms"] = [[v.numerator, v.denominator, p.numerator, p.denominator] for v, p in self.atoms]
        elif self.is_discrete:
            d["coupling"] = self.coupling
            d["table"] = [
                {"step": [[c.numerator, c.denominator] for c in v], "p": [p.numerator, p.denominator]}
                for v, p in self.table
            ]
        else:
            d["scale"] = self.scale
        return d

    @classmethod
    def from_json(cls, doc: dict) -> "StepDistribution":
        kind = doc.get("kind")
        k = int(doc.get("k", 1))
        if kind == "discrete-atoms":
            if doc.get("coupling", "iid-components") == "exchangeable-given-table":
                rows = [
                    (tuple(Fraction(int(a), int(b)) for a, b in row["step"]), Fraction(int(row["p"][0]), int(row["p"][1])))
                    for row in doc["table"]
                ]
                return cls.from_table(rows, k)
            atoms = [(Fraction(int(a), int(b)), Fraction(int(c), int(e))) for a, b, c, e in doc["atoms"]]
            return cls.from_atoms(atoms, k)
        if kind == "gaussian":
            return cls.gaussian(k, float(doc.get("scale", 1.0)))
        if kind == "uniform-symmetric":
            return cls.uniform(k, float(doc.get("scale", doc.get("half_width", math.sqrt(3.0)))))
        raise UnsupportedDistributionError(f"unknown step kind {kind!r}")

    def with_k(self, k: int) -> "StepDistribution":
        if not self.is_iid:
            raise InvalidInputError("cannot change the dimension of a joint table")
        return replace(self, k=k)


def load_step_distribution(source) -> StepDistribution:
    """Read a step law from a JSON file path, a JSON string or a dict."""
    if isinstance(source, dict):
        return StepDistribution.from_json(source)
    text = str(source)
    if text.lstrip().startswith("{"):
        return StepDistribution.from_json(json.loads(text))
    return StepDistribution.from_json(json.loads(Path(text).read_text()))


# assumptions --------------------------------------------------------------------


@dataclass
class AssumptionReport:
    variance: object
    odd_moments: list[tuple[int, object]]
    r_required: int
    satisfied: dict[str, bool]
    notes: list[str] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(self.satisfied.values())


def required_moment_order(chamber: ChamberType | str, k: int) -> int:
    """Moment order of the (MA) assumption.

    ``2k-1`` for C and ``2k-2`` for D when k >= 3; for k = 2 it is 3 for C
    and any order above 2 for D (3 is reported).  For A the order ``k-1``
    applies from k = 4 on, below that some order above 2.
    """
    z = ChamberType.parse(chamber)
    if k < z.min_dim():
        raise InvalidInputError(f"chamber {z.value} needs k >= {z.min_dim()}")
    if z is ChamberType.C:
        return 2 * k - 1 if k != 2 else 3
    if z is ChamberType.D:
        return 2 * k - 2 if k >= 3 else 3
    return k - 1 if k >= 4 else 3


def _sa_orders(z: ChamberType, k: int) -> list[int]:
    if z is ChamberType.A:
        return []
    if z is ChamberType.D and k == 2:
        # r^D only needs to exceed 2, so the only odd order below it is 1
        return [1]
    return list(range(1, required_moment_order(z, k) + 1, 2))


def validate_assumptions(dist: StepDistribution, chamber: ChamberType | str, k: int | None = None) -> AssumptionReport:
    """Check the moment (MA), symmetry (SA) and normalisation (NA) assumptions."""
    z = ChamberType.parse(chamber)
    k = dist.k if k is None else k
    r_req = required_moment_order(z, k)
    notes: list[str] = []
    variance = dist.moment(2)
    odd = [(r, dist.moment(r)) for r in range(1, r_req + 1, 2)]
    sa_need = _sa_orders(z, k)
    sa = all(m == 0 for r, m in odd if r in sa_need)
    if dist.is_discrete and not dist.is_iid:
        # the conditional law of the other coordinates must itself be symmetric
        cond = dist.is_conditionally_symmetric()
        if not cond:
            notes.append("joint table is not invariant under single-coordinate sign flips")
        sa = sa and cond
    if z is ChamberType.A:
        notes.append("SA is not needed for chamber A")
    if dist.is_discrete:
        notes.append("MA satisfied (bounded support)")
    elif dist.kind == "gaussian":
        notes.append("MA satisfied (gaussian: all moments finite)")
    else:
        notes.append("MA satisfied (bounded support)")
    if isinstance(variance, Fraction):
        na = variance == 1
    else:
        na = abs(variance - 1.0) <= 1e-12
    return AssumptionReport(
        variance=variance,
        odd_moments=odd,
        r_required=r_req,
        satisfied={"MA": True, "SA": bool(sa), "NA": bool(na)},
        notes=notes,
    )


def one_step_average(dist: StepDistribution, chamber: ChamberType | str, x):
    """``E[h(x + xi)]`` over one step, unkilled.

    Exact (a ``Fraction`` or int) for discrete laws and rational ``x``; a
    float otherwise.
    """
    z = ChamberType.parse(chamber)
    pt = chambers.as_point(x)
    if len(pt) != dist.k:
        raise InvalidInputError("start point dimension does not match the step law")
    return sum(p * chambers.h(z, tuple(a + b for a, b in zip(pt, st))) for st, p in dist.joint_support())


# paths ----------------------------------------------------------------------------


@dataclass
class PathSample:
    """A finite trajectory stored as start point plus increments."""

    start: np.ndarray
    steps: np.ndarray
    tau: int | None = None
    T: int | None = None
    nu: int | None = None

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.float64)
        self.steps = np.asarray(self.steps, dtype=np.float64).reshape(-1, self.start.shape[0])

    @property
    def n(self) -> int:
        return self.steps.shape[0]

    @property
    def positions(self) -> np.ndarray:
        out = np.empty((self.n + 1, self.start.shape[0]))
        out[0] = self.start
        np.cumsum(self.steps, axis=0, out=out[1:])
        out[1:] += self.start
        return out


def _draw_steps(dist: StepDistribution, traj, seed: int, substream: int, n: int) -> np.ndarray:
    """Steps for one or many trajectories; shape ``(len(traj), n, k)``."""
    traj = np.atleast_1d(np.asarray(traj, dtype=np.uint64))
    k = dist.k
    k0, k1 = key_from_seed(seed)

    def words(idx: np.ndarray) -> np.ndarray:
        # words idx (1-d) for every trajectory -> (len(traj), len(idx))
        blocks = idx // 4
        ub = np.unique(blocks)
        out = philox4x64(ub[None, :], traj[:, None], substream, 0, k0, k1)
        lut = np.stack(out, axis=-1)  # (T, nblocks, 4)
        pos = np.searchsorted(ub, blocks)
        return lut[:, pos, idx % 4]

    if n == 0:
        return np.zeros((traj.shape[0], 0, k))
    if dist.is_discrete:
        values, cum, iid = dist.sampling_arrays()
        if iid:
            u = words_to_uniform(words(np.arange(n * k, dtype=np.int64)))
            return values[np.searchsorted(cum, u, side="right")].reshape(-1, n, k)
        u = words_to_uniform(words(np.arange(n, dtype=np.int64)))
        return values[np.searchsorted(cum, u, side="right")].reshape(-1, n, k)
    if dist.kind == "gaussian":
        u = words_to_uniform(words(np.arange(2 * n * k, dtype=np.int64)))
        return (dist.scale * uniforms_to_normal(u[:, 0::2], u[:, 1::2])).reshape(-1, n, k)
    u = words_to_uniform(words(np.arange(n * k, dtype=np.int64)))
    return (dist.scale * (2.0 * u - 1.0)).reshape(-1, n, k)


def sample_path(dist: StepDistribution, x: Sequence[float], n: int, stream: RandomStream) -> PathSample:
    """Sample ``n`` steps from ``x`` using the words of ``stream``.

    The same ``(seed, index, substream)`` always reproduces the same path,
    and trajectory ``i`` of :func:`sample_paths` equals
    ``sample_path(..., RandomStream(seed, i, substream))``.
    """
    x = np.asarray(chambers.as_point(x), dtype=np.float64)
    if x.shape[0] != dist.k:
        raise InvalidInputError("start point dimension does not match the step law")
    if n < 0:
        raise InvalidInputError("n must be non-negative")
    steps = _draw_steps(dist, stream.index, stream.seed, stream.substream, n)[0]
    return PathSample(start=x, steps=steps)


def sample_paths(dist: StepDistribution, x, n: int, seed: int, first: int, count: int, substream: int = 0) -> np.ndarray:
    """Positions of trajectories ``first .. first+count-1``; shape ``(count, n+1, k)``."""
    x = np.asarray(x, dtype=np.float64)
    steps = _draw_steps(dist, np.arange(first, first + count), seed, substream, n)
    pos = np.empty((count, n + 1, dist.k))
    pos[:, 0] = x
    np.cumsum(steps, axis=1, out=pos[:, 1:])
    pos[:, 1:] += x
    return pos


def _first(flags: np.ndarray) -> int | None:
    idx = np.flatnonzero(flags)
    return int(idx[0]) if idx.size else None


def exit_time_tau(chamber: ChamberType | str, path: PathSample) -> int | None:
    """First index whose position is outside the open chamber."""
    return _first(~chambers.contains(chamber, path.positions))


def sign_time_T(chamber: ChamberType | str, path: PathSample) -> int | None:
    """First index with ``h(S(m)) <= 0``."""
    return _first(chambers.h(chamber, path.positions) <= 0)


def entrance_time_nu(chamber: ChamberType | str, n: int, eps: float, path: PathSample) -> int | None:
    """First index at which the path is in the auxiliary chamber ``W_{n,eps}``."""
    chambers.auxiliary_threshold(n, eps)
    return _first(chambers.in_auxiliary(chamber, n, eps, path.positions))


def annotate(path: PathSample, chamber: ChamberType | str, n: int | None = None, eps: float | None = None) -> PathSample:
    out = replace(path, tau=exit_time_tau(chamber, path), T=sign_time_T(chamber, path))
    if n is not None and eps is not None:
        out.nu = entrance_time_nu(chamber, n, eps, path)
    return out


def nu_exceedance_frequency(dist: StepDistribution, chamber: ChamberType | str, x, ns: Sequence[int],
                            eps: float, samples: int, seed: int = 0) -> list[float]:
    """Empirical ``P(nu_n > n^(1-eps))`` for each ``n`` in ``ns``."""
    out = []
    for j, n in enumerate(ns):
        horizon = int(math.floor(n ** (1.0 - eps)))
        pos = sample_paths(dist, x, horizon, seed, 0, samples, substream=1000 + j)
        hit = chambers.in_auxiliary(chamber, n, eps, pos).any(axis=1)
        out.append(float(1.0 - hit.mean()))
    return out
