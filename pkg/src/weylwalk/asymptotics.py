"""Tail exponents and constants, the limit law of the conditioned walk, and tail fits."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import chambers
from .chambers import ChamberType
from .errors import InvalidInputError, UnsupportedError
from .rng import RandomStream

__all__ = [
    "alpha",
    "kappa",
    "kappa_reflection",
    "K_constant",
    "mu_normalizer",
    "mu_moments",
    "mu_second_moment",
    "bm_tail",
    "bm_density_asym",
    "TailFit",
    "tail_fit",
    "LimitMeasure",
    "constants_table",
    "NormalizerEstimate",
]

MAX_K = 8


def _check(chamber, k: int, allow_a: bool = False) -> ChamberType:
    z = ChamberType.parse(chamber)
    if z is ChamberType.A and not allow_a:
        raise UnsupportedError("only the C and D chambers have closed-form constants here")
    if not isinstance(k, (int, np.integer)) or k < z.min_dim():
        raise InvalidInputError(f"chamber {z.value} needs an integer k >= {z.min_dim()}, got {k!r}")
    return z


def alpha(chamber: ChamberType | str, k: int) -> int:
    """Tail exponent: ``k^2`` for C, ``k^2 - k`` for D (``k(k-1)/2`` for A)."""
    z = _check(chamber, k, allow_a=True)
    return chambers.degree(z, k)


def _log_kappa_D(k: int) -> float:
    s = (3 * k * k - 3 * k + 2) / 2 * math.log(2.0) - k * math.log(math.pi) - math.lgamma(k + 1)
    for i in range(1, k + 1):
        for j in range(i + 1, k + 1):
            s -= math.log((2 * j - 1) ** 2 - (2 * i - 1) ** 2)
    for i in range(1, k + 1):
        s += math.lgamma(1 + i / 2) + math.lgamma((1 + i) / 2)
    return s


def kappa(chamber: ChamberType | str, k: int) -> float:
    """Closed-form prefactor of ``P(tau > n) ~ kappa V(x) n^(-alpha/2)``.

    Gamma products are accumulated in the log domain.  The D-chamber value
    is the closed form as stated; :func:`kappa_reflection` gives the
    constant implied by the Brownian exit asymptotics and differs from it
    for D (see the tests).
    """
    z = _check(chamber, k)
    s = _log_kappa_D(k)
    if z is ChamberType.C:
        s += (3 * k - 2) / 2 * math.log(2.0)
        for i in range(1, k + 1):
            s -= math.log(2 * k + 1 - 2 * i)
    return math.exp(s)


def _group(z: ChamberType, k: int):
    """Signed permutations of the C or D reflection group with their signs."""
    out = []
    for perm in itertools.permutations(range(k)):
        inv = sum(1 for i in range(k) for j in range(i + 1, k) if perm[i] > perm[j])
        for signs in itertools.product((1, -1), repeat=k):
            neg = sum(1 for s in signs if s < 0)
            if z is ChamberType.D and neg % 2:
                continue
            sgn = (-1) ** inv * ((-1) ** neg if z is ChamberType.C else 1)
            out.append((perm, signs, sgn))
    return out


def reflection_constant(chamber: ChamberType | str, k: int) -> Fraction:
    """``c`` with ``sum_w sgn(w) <y, w z>^alpha / alpha! = h(y) h(z) / c`` (exact)."""
    z = _check(chamber, k)
    if k > 6:
        raise UnsupportedError("group sums are limited to k <= 6")
    a = alpha(z, k)
    y = [3 * i + 1 for i in range(k)]
    w = [5 * i + 2 for i in range(k)]
    total = 0
    for perm, signs, sgn in _group(z, k):
        total += sgn * sum(y[i] * signs[i] * w[perm[i]] for i in range(k)) ** a
    return Fraction(chambers.h(z, y) * chambers.h(z, w) * math.factorial(a), total)


def kappa_reflection(chamber: ChamberType | str, k: int) -> float:
    """Brownian exit constant ``(2 pi)^(-k/2) N / c`` from the reflection group.

    ``N`` is the normaliser of the limit law and ``c`` the constant of
    :func:`reflection_constant`; this expresses ``P(tau^BM_y > t) ~
    kappa h(y) t^(-alpha/2)`` through the small-``y`` expansion of the
    alternating sum of Gaussian kernels.
    """
    z = _check(chamber, k)
    N = mu_normalizer(z, k, method="selberg").value
    return (2 * math.pi) ** (-k / 2) * N / float(reflection_constant(z, k))


# limit law -----------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizerEstimate:
    value: float
    std_error: float
    method: str


def _log_selberg_full(z: ChamberType, k: int) -> float:
    """``log int_{R^k} |h(y)| exp(-|y|^2/2) dy`` in closed form."""
    a = 1.0 if z is ChamberType.C else 0.5
    s = k * math.log(2.0) + k * (k - 1) / 2 * math.log(2.0)
    if z is ChamberType.D:
        s -= k / 2 * math.log(2.0)
    for j in range(k):
        s += math.lgamma(a + j / 2) + math.lgamma(1 + (j + 1) / 2) - math.lgamma(1.5)
    return s


def _gl(m: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _chamber_quadrature(z: ChamberType, k: int, weight_fn, m: int, L: float) -> float:
    """Integrate ``weight_fn(y) exp(-|y|^2/2)`` over the chamber.

    Gap coordinates map the chamber onto an orthant with unit Jacobian:
    for C ``y_i = g_1 + ... + g_i``; for D ``y_1 = t`` and
    ``y_2 = |t| + g_2``, ``y_i = y_(i-1) + g_i``.  Each gap runs over
    ``[0, L]`` (``t`` over ``[-L, 0]`` and ``[0, L]``).
    """
    g, gw = _gl(m, 0.0, L)
    axes, weights = [], []
    if z is ChamberType.C:
        axes = [g] * k
        weights = [gw] * k
    else:
        t = np.concatenate([g - L, g])
        tw = np.concatenate([gw, gw])
        axes = [t] + [g] * (k - 1)
        weights = [tw] + [gw] * (k - 1)
    grids = np.meshgrid(*axes, indexing="ij")
    wgrid = np.ones_like(grids[0])
    for i, w in enumerate(weights):
        sh = [1] * k
        sh[i] = w.shape[0]
        wgrid = wgrid * w.reshape(sh)
    y = np.empty(grids[0].shape + (k,))
    if z is ChamberType.C:
        acc = np.zeros_like(grids[0])
        for i in range(k):
            acc = acc + grids[i]
            y[..., i] = acc
    else:
        y[..., 0] = grids[0]
        if k >= 2:
            y[..., 1] = np.abs(grids[0]) + grids[1]
        for i in range(2, k):
            y[..., i] = y[..., i - 1] + grids[i]
    r2 = np.sum(y * y, axis=-1)
    f = weight_fn(y) * np.exp(-0.5 * r2)
    return float(np.sum(f * wgrid))


def _quad_nodes(k: int) -> int:
    return {1: 200, 2: 120, 3: 60, 4: 28}.get(k, 0)


def mu_normalizer(chamber: ChamberType | str, k: int, method: str = "quadrature",
                  samples: int = 1_000_000, seed: int = 0) -> NormalizerEstimate:
    """``N = int_W h(y) exp(-|y|^2/2) dy``.

    ``quadrature`` (k <= 4) uses Gauss-Legendre in gap coordinates and
    reports the change against a coarser rule as its error; ``mc`` samples
    ``|h|`` under a standard normal on ``R^k`` and divides by the group
    order; ``selberg`` is the closed form.
    """
    z = _check(chamber, k)
    if method == "selberg":
        G = chambers.reflection_group_order(z, k)
        return NormalizerEstimate(math.exp(_log_selberg_full(z, k)) / G, 0.0, method)
    if method == "quadrature":
        m = _quad_nodes(k)
        if not m:
            raise UnsupportedError("tensor quadrature covers k <= 4; use method='mc'")
        L = 8.0 + 1.5 * k
        hf = lambda y: chambers.h(z, y)  # noqa: E731
        fine = _chamber_quadrature(z, k, hf, m, L)
        coarse = _chamber_quadrature(z, k, hf, (2 * m) // 3, L)
        return NormalizerEstimate(fine, abs(fine - coarse), method)
    if method == "mc":
        y = RandomStream(seed, 0, 7).normals(0, samples * k).reshape(samples, k)
        v = np.abs(chambers.h(z, y))
        G = chambers.reflection_group_order(z, k)
        scale = (2 * math.pi) ** (k / 2) / G
        return NormalizerEstimate(float(v.mean() * scale), float(v.std(ddof=1) / math.sqrt(samples) * scale), method)
    raise InvalidInputError(f"unknown method {method!r}")


def mu_moments(chamber: ChamberType | str, k: int, orders: Sequence[Sequence[int]],
               method: str = "quadrature", samples: int = 1_000_000, seed: int = 0) -> list[NormalizerEstimate]:
    """``E_mu[y_1^a_1 ... y_k^a_k]`` for each multi-index in ``orders``."""
    z = _check(chamber, k)
    orders = [tuple(int(a) for a in o) for o in orders]
    for o in orders:
        if len(o) != k or min(o) < 0:
            raise InvalidInputError(f"bad multi-index {o}")
    out = []
    if method == "quadrature":
        m = _quad_nodes(k)
        if not m:
            raise UnsupportedError("tensor quadrature covers k <= 4; use method='mc'")
        L = 8.0 + 1.5 * k
        hf = lambda y: chambers.h(z, y)  # noqa: E731
        N = _chamber_quadrature(z, k, hf, m, L)
        Nc = _chamber_quadrature(z, k, hf, (2 * m) // 3, L)
        for o in orders:
            mono = lambda y, o=o: hf(y) * np.prod([y[..., i] ** o[i] for i in range(k)], axis=0)  # noqa: E731
            fine = _chamber_quadrature(z, k, mono, m, L) / N
            coarse = _chamber_quadrature(z, k, mono, (2 * m) // 3, L) / Nc
            out.append(NormalizerEstimate(fine, abs(fine - coarse), method))
        return out
    if method == "mc":
        y = RandomStream(seed, 0, 8).normals(0, samples * k).reshape(samples, k)
        # fold every sample into the chamber: sort |y| (C) or sort with a sign fix (D)
        a = np.sort(np.abs(y), axis=1)
        if z is ChamberType.D:
            neg = (np.sum(y < 0, axis=1) % 2) == 1
            a[neg, 0] = -a[neg, 0]
        w = chambers.h(z, a)
        for o in orders:
            mono = np.prod([a[:, i] ** o[i] for i in range(k)], axis=0)
            ratio = np.sum(w * mono) / np.sum(w)
            # delta-method error of a ratio estimator
            resid = w * (mono - ratio)
            se = float(np.sqrt(np.mean(resid**2) / samples) / np.mean(w))
            out.append(NormalizerEstimate(float(ratio), se, method))
        return out
    raise InvalidInputError(f"unknown method {method!r}")


def mu_second_moment(chamber: ChamberType | str, k: int) -> float:
    """``E_mu |y|^2 = k + alpha`` (h is homogeneous of degree alpha)."""
    z = _check(chamber, k)
    return float(k + alpha(z, k))


def K_constant(chamber: ChamberType | str, k: int, method: str = "selberg", constant: str = "formula") -> float:
    """``|G| kappa / int_{R^k} |h| exp(-|y|^2/2) dy`` which equals ``kappa / N``."""
    z = _check(chamber, k)
    kap = kappa(z, k) if constant == "formula" else kappa_reflection(z, k)
    return kap / mu_normalizer(z, k, method=method).value


def bm_tail(chamber: ChamberType | str, y, t: float, constant: str = "formula") -> float:
    """Asymptotic Brownian survival ``kappa h(y) t^(-alpha/2)``."""
    z = ChamberType.parse(chamber)
    y = chambers.as_point(y)
    if not t > 0:
        raise InvalidInputError("t must be positive")
    if not chambers.contains(z, y):
        raise InvalidInputError("y must lie in the open chamber")
    k = len(y)
    kap = kappa(z, k) if constant == "formula" else kappa_reflection(z, k)
    return kap * float(chambers.h(z, y)) * t ** (-alpha(z, k) / 2)


def bm_density_asym(chamber: ChamberType | str, y, zpt, t: float, constant: str = "formula") -> float:
    """Asymptotic killed density ``K t^(-k/2) exp(-|z|^2/2t) h(y) h(z) t^(-alpha)``."""
    z = ChamberType.parse(chamber)
    if not t > 0:
        raise InvalidInputError("t must be positive")
    y = np.asarray(y, dtype=float)
    zz = np.asarray(zpt, dtype=float)
    k = y.shape[-1]
    K = K_constant(z, k, constant=constant)
    hz = chambers.h(z, zz)
    hz = np.where(chambers.contains(z, zz), hz, 0.0) if zz.ndim > 1 else (hz if chambers.contains(z, zz) else 0.0)
    a = alpha(z, k)
    return K * t ** (-k / 2) * np.exp(-np.sum(zz * zz, axis=-1) / (2 * t)) * float(chambers.h(z, y)) * hz * t ** (-a)


@dataclass(frozen=True)
class LimitMeasure:
    """The law with density ``h(y) exp(-|y|^2/2) / N`` on the chamber."""

    chamber: ChamberType
    k: int
    normalizer: float

    def __post_init__(self):
        if not self.normalizer > 0:
            raise InvalidInputError("normalizer must be positive")

    @classmethod
    def build(cls, chamber: ChamberType | str, k: int, method: str = "selberg") -> "LimitMeasure":
        z = _check(chamber, k)
        return cls(z, k, mu_normalizer(z, k, method=method).value)

    def density(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        inside = chambers.contains(self.chamber, y)
        v = chambers.h(self.chamber, y) * np.exp(-0.5 * np.sum(y * y, axis=-1)) / self.normalizer
        return np.where(inside, v, 0.0)


# tail fits ---------------------------------------------------------------------


@dataclass(frozen=True)
class TailFit:
    slope: float
    prefactor: float
    r_squared: float
    n_range: tuple[int, int]

    def __post_init__(self):
        if self.n_range[0] > self.n_range[1]:
            raise InvalidInputError("empty fit window")
        if not 0.0 <= self.r_squared <= 1.0:
            raise InvalidInputError("r_squared must lie in [0, 1]")


def tail_fit(curve, n_min: int | None = None, n_max: int | None = None, even_only: bool = False) -> TailFit:
    """Least-squares fit of ``log P = log c + slope log n``.

    The default window is the upper half of the curve in ``log n``; with
    ``even_only`` odd ``n`` are skipped to remove period-two oscillation.
    """
    arr = np.asarray(curve, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError("curve must be a list of (n, P) pairs")
    if arr.shape[0] < 10:
        raise InvalidInputError("at least 10 points are required")
    n, p = arr[:, 0], arr[:, 1]
    if np.any(p <= 0):
        raise InvalidInputError("all probabilities must be positive")
    if np.any(np.diff(n) <= 0) or n[0] <= 0:
        raise InvalidInputError("n must be positive and strictly increasing")
    lo = math.sqrt(n[0] * n[-1]) if n_min is None else n_min
    hi = n[-1] if n_max is None else n_max
    sel = (n >= lo) & (n <= hi)
    if even_only:
        sel &= (n.astype(np.int64) % 2) == 0
    if sel.sum() < 2:
        raise InvalidInputError("fewer than two points in the fit window")
    X, Y = np.log(n[sel]), np.log(p[sel])
    slope, icpt = np.polyfit(X, Y, 1)
    res = Y - (icpt + slope * X)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res**2)) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    return TailFit(float(slope), float(math.exp(icpt)), r2, (int(n[sel][0]), int(n[sel][-1])))


def constants_table(chamber: ChamberType | str, ks: Sequence[int]) -> list[dict]:
    z = ChamberType.parse(chamber)
    return [{"chamber": z.value, "k": int(k), "alpha": alpha(z, k), "kappa": kappa(z, k),
             "K": K_constant(z, k)} for k in ks]
