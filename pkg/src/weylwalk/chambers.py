"""Weyl chamber geometry and the harmonic functions vanishing on the walls.

Three chambers are supported::

    A:  x_1 < x_2 < ... < x_k
    C:  0 < x_1 < x_2 < ... < x_k
    D:  |x_1| < x_2 < ... < x_k

All chambers are open; points on a wall are outside.

The product-form functions work on plain sequences (ints and ``Fraction``
give exact results) and on arrays of shape ``(..., k)`` (vectorised over the
leading axes).
"""
from __future__ import annotations

import enum
import math
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import mpmath
import numpy as np

from .errors import InvalidInputError, UnsupportedError

__all__ = [
    "ChamberType",
    "as_point",
    "contains",
    "h",
    "h_log",
    "h_det",
    "h_smoothed",
    "in_auxiliary",
    "auxiliary_threshold",
    "boundary_distance",
    "degree",
    "reflection_group_order",
]


class ChamberType(enum.Enum):
    A = "A"
    C = "C"
    D = "D"

    @property
    def gamma(self) -> int | None:
        """Exponent shift in the determinant form (1 for C, 0 for D)."""
        return {"C": 1, "D": 0}.get(self.value)

    @property
    def code(self) -> int:
        # integer tag shared with the compiled kernels
        return {"A": 0, "C": 1, "D": 2}[self.value]

    @classmethod
    def parse(cls, value: "ChamberType | str") -> "ChamberType":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise InvalidInputError(f"unknown chamber {value!r}; expected A, C or D") from None

    def min_dim(self) -> int:
        return 2 if self is ChamberType.D else 1


def _columns(x):
    """Split ``x`` into per-coordinate values, vectorised for arrays."""
    if isinstance(x, np.ndarray):
        if x.ndim == 0:
            raise InvalidInputError("point must have at least one coordinate")
        k = x.shape[-1]
        if k == 0:
            raise InvalidInputError("point must have at least one coordinate")
        return [x[..., i] for i in range(k)]
    cols = list(x)
    if not cols:
        raise InvalidInputError("point must have at least one coordinate")
    return cols


def as_point(x: Sequence) -> tuple:
    """Validate a single point and return it as a tuple."""
    cols = _columns(np.asarray(x) if not isinstance(x, (list, tuple)) else x)
    for c in cols:
        if not isinstance(c, Rational) and not math.isfinite(float(c)):
            raise InvalidInputError(f"non-finite coordinate {c!r}")
    return tuple(cols)


def degree(chamber: ChamberType | str, k: int) -> int:
    """Polynomial degree of h, which equals the tail exponent alpha."""
    z = ChamberType.parse(chamber)
    if z is ChamberType.A:
        return k * (k - 1) // 2
    if z is ChamberType.C:
        return k * k
    return k * k - k


def reflection_group_order(chamber: ChamberType | str, k: int) -> int:
    z = ChamberType.parse(chamber)
    if z is ChamberType.A:
        return math.factorial(k)
    if z is ChamberType.C:
        return 2**k * math.factorial(k)
    return 2 ** (k - 1) * math.factorial(k)


def contains(chamber: ChamberType | str, x):
    """Membership in the open chamber.

    Returns a bool for a single point and a boolean array for an array of
    points of shape ``(..., k)``.
    """
    z = ChamberType.parse(chamber)
    cols = _columns(x)
    k = len(cols)
    vec = isinstance(x, np.ndarray) and x.ndim > 1
    ok = np.ones(x.shape[:-1], dtype=bool) if vec else True
    start = 0
    if z is ChamberType.C:
        ok = ok & (cols[0] > 0)
    elif z is ChamberType.D:
        if k < 2:
            raise InvalidInputError("chamber D needs k >= 2")
        ok = ok & (abs(cols[0]) < cols[1])
        start = 1
    for i in range(start, k - 1):
        ok = ok & (cols[i] < cols[i + 1])
    return ok if vec else bool(ok)


def h(chamber: ChamberType | str, x):
    """Product form of the chamber's harmonic function.

    ``h^A = prod_{i<j} (x_j - x_i)``, ``h^D = prod_{i<j} (x_j^2 - x_i^2)`` and
    ``h^C = h^D * prod_i x_i``.  Exact for int / Fraction input.
    """
    z = ChamberType.parse(chamber)
    cols = _columns(x)
    k = len(cols)
    out = 1
    if z is ChamberType.A:
        for i in range(k):
            for j in range(i + 1, k):
                out = out * (cols[j] - cols[i])
        return out
    sq = [c * c for c in cols]
    for i in range(k):
        for j in range(i + 1, k):
            out = out * (sq[j] - sq[i])
    if z is ChamberType.C:
        for c in cols:
            out = out * c
    return out


def h_log(chamber: ChamberType | str, x) -> tuple[int, float]:
    """Sign and log-magnitude of h, for dimensions where h overflows."""
    z = ChamberType.parse(chamber)
    cols = [float(c) for c in _columns(x)]
    k = len(cols)
    factors = []
    for i in range(k):
        for j in range(i + 1, k):
            if z is ChamberType.A:
                factors.append(cols[j] - cols[i])
            else:
                factors.append(cols[j] - cols[i])
                factors.append(cols[j] + cols[i])
    if z is ChamberType.C:
        factors.extend(cols)
    sign = 1
    logmag = 0.0
    for f in factors:
        if f == 0:
            return 0, -math.inf
        if f < 0:
            sign = -sign
        logmag += math.log(abs(f))
    return sign, logmag


def _det_exact(rows: list[list[Fraction]]) -> Fraction:
    m = [row[:] for row in rows]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            if m[r][c] != 0:
                f = m[r][c] / m[c][c]
                for cc in range(c, n):
                    m[r][cc] -= f * m[c][cc]
    return det


# float inputs above this dimension go through mpmath; below it float64 LU
# still meets 1e-9 relative agreement with the product form on [-10, 10]^k
_EXTENDED_DET_FROM = 5


def h_det(chamber: ChamberType | str, x):
    """Determinant form ``det[x_j^(2i-2+gamma)]`` for chambers C and D."""
    z = ChamberType.parse(chamber)
    if z is ChamberType.A:
        raise UnsupportedError("determinant form is only provided for chambers C and D")
    cols = _columns(x)
    if isinstance(x, np.ndarray) and x.ndim > 1:
        raise InvalidInputError("h_det evaluates one point at a time")
    k = len(cols)
    g = z.gamma
    if all(isinstance(c, Rational) for c in cols):
        rows = [[Fraction(c) ** (2 * i + g) for c in cols] for i in range(k)]
        val = _det_exact(rows)
        return int(val) if val.denominator == 1 else val
    fcols = [float(c) for c in cols]
    if k < _EXTENDED_DET_FROM:
        mat = np.array([[c ** (2 * i + g) for c in fcols] for i in range(k)])
        return float(np.linalg.det(mat))
    with mpmath.workprec(64 + 12 * k * k):
        mat = mpmath.matrix([[mpmath.mpf(c) ** (2 * i + g) for c in fcols] for i in range(k)])
        return float(mpmath.det(mat))


def h_smoothed(chamber: ChamberType | str, t: float, x):
    """Strictly positive majorant ``h_t`` built from the factors ``t + |.|``."""
    if not t > 0:
        raise InvalidInputError(f"t must be positive, got {t!r}")
    z = ChamberType.parse(chamber)
    cols = _columns(x)
    k = len(cols)
    out = 1
    for i in range(k):
        for j in range(i + 1, k):
            out = out * (t + abs(cols[j] - cols[i]))
            if z is not ChamberType.A:
                out = out * (t + abs(cols[j] + cols[i]))
    if z is ChamberType.C:
        for c in cols:
            out = out * (t + abs(c))
    return out


def auxiliary_threshold(n: int, eps: float) -> float:
    if not 0 < eps < 0.5:
        raise InvalidInputError(f"eps must lie in (0, 1/2), got {eps!r}")
    if n < 1:
        raise InvalidInputError(f"n must be a positive integer, got {n!r}")
    return float(n) ** (0.5 - eps)


def in_auxiliary(chamber: ChamberType | str, n: int, eps: float, x):
    """True when every gap relevant to the chamber exceeds ``n^(1/2 - eps)``.

    A checks ``|x_j - x_i|``; D adds ``|x_j + x_i|``; C adds ``|x_i|`` on
    top of D.
    """
    z = ChamberType.parse(chamber)
    thr = auxiliary_threshold(n, eps)
    cols = _columns(x)
    k = len(cols)
    vec = isinstance(x, np.ndarray) and x.ndim > 1
    ok = np.ones(x.shape[:-1], dtype=bool) if vec else True
    for i in range(k):
        for j in range(i + 1, k):
            ok = ok & (abs(cols[j] - cols[i]) > thr)
            if z is not ChamberType.A:
                ok = ok & (abs(cols[j] + cols[i]) > thr)
    if z is ChamberType.C:
        for c in cols:
            ok = ok & (abs(c) > thr)
    return ok if vec else bool(ok)


def boundary_distance(chamber: ChamberType | str, x) -> float:
    """Euclidean distance from an interior point to the chamber boundary.

    The chamber is a convex cone cut out by its walls, so for interior
    points this is the smallest distance to a wall hyperplane.
    """
    z = ChamberType.parse(chamber)
    cols = [float(c) for c in _columns(x)]
    k = len(cols)
    r2 = math.sqrt(2.0)
    d = math.inf
    start = 0
    if z is ChamberType.C:
        d = abs(cols[0])
    elif z is ChamberType.D:
        d = min(abs(cols[1] - cols[0]), abs(cols[1] + cols[0])) / r2
        start = 1
    for i in range(start, k - 1):
        d = min(d, abs(cols[i + 1] - cols[i]) / r2)
    return d
