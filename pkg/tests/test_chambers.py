from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from weylwalk import chambers
from weylwalk.chambers import ChamberType
from weylwalk.errors import InvalidInputError, UnsupportedError

ints = st.integers(-15, 15)


def test_parse_and_codes():
    assert ChamberType.parse("c") is ChamberType.C
    assert [z.code for z in (ChamberType.A, ChamberType.C, ChamberType.D)] == [0, 1, 2]
    with pytest.raises(InvalidInputError):
        ChamberType.parse("B")


@pytest.mark.parametrize(
    "z, x, inside",
    [
        ("A", (1, 2, 3), True),
        ("A", (1, 1, 3), False),
        ("C", (1, 2), True),
        ("C", (0, 2), False),
        ("C", (-1, 2), False),
        ("D", (-1, 2), True),
        ("D", (2, 2), False),
        ("D", (-2, 2), False),
    ],
)
def test_contains(z, x, inside):
    assert chambers.contains(z, x) is inside


def test_contains_vectorised():
    pts = np.array([[1, 2], [2, 1], [-1, 3]])
    np.testing.assert_array_equal(chambers.contains("D", pts), [True, False, True])


def test_h_values():
    assert chambers.h("A", (1, 2, 4)) == 1 * 3 * 2
    assert chambers.h("D", (1, 2)) == 3
    assert chambers.h("C", (1, 2)) == 6
    assert chambers.h("C", (Fraction(1, 2), 1)) == Fraction(3, 8)


def test_degree_matches_exponent():
    for k in range(1, 6):
        assert chambers.degree("C", k) == k * k
        if k >= 2:
            assert chambers.degree("D", k) == k * k - k


@given(st.lists(ints, min_size=2, max_size=4), st.integers(1, 4))
def test_h_homogeneous(x, s):
    for z in ("A", "C", "D"):
        deg = chambers.degree(z, len(x))
        assert chambers.h(z, [s * c for c in x]) == s**deg * chambers.h(z, x)


@given(st.lists(ints, min_size=2, max_size=4))
def test_h_positive_exactly_inside(x):
    for z in ("C", "D"):
        if chambers.contains(z, x):
            assert chambers.h(z, x) > 0


@given(st.lists(ints, min_size=1, max_size=4))
def test_h_det_matches_product_up_to_sign(x):
    for z in ("C", "D"):
        if z == "D" and len(x) < 2:
            continue
        a, b = chambers.h_det(z, x), chambers.h(z, x)
        assert abs(a) == abs(b)


def test_h_det_float_extended_precision():
    x = [0.5, 1.25, 2.0, 3.5, 4.75, 6.0]
    prod = float(chambers.h("C", x))
    assert chambers.h_det("C", x) == pytest.approx(prod, rel=1e-9)
    with pytest.raises(UnsupportedError):
        chambers.h_det("A", x)


@given(st.lists(ints, min_size=2, max_size=4))
def test_h_log_consistent(x):
    sign, lm = chambers.h_log("C", x)
    v = chambers.h("C", x)
    if v == 0:
        assert sign == 0
    else:
        assert sign == (1 if v > 0 else -1)
        assert lm == pytest.approx(np.log(abs(v)), abs=1e-9)


@given(st.lists(ints, min_size=2, max_size=4), st.floats(0.1, 5.0))
def test_smoothed_majorant(x, t):
    for z in ("A", "C", "D"):
        assert chambers.h_smoothed(z, t, x) > 0
        assert chambers.h_smoothed(z, t, x) >= abs(chambers.h(z, x))


def test_auxiliary_chamber():
    assert chambers.auxiliary_threshold(100, 0.25) == pytest.approx(100**0.25)
    assert chambers.in_auxiliary("C", 100, 0.25, (4, 9))
    assert not chambers.in_auxiliary("C", 100, 0.25, (3, 9))
    with pytest.raises(InvalidInputError):
        chambers.auxiliary_threshold(10, 0.5)


def test_boundary_distance():
    assert chambers.boundary_distance("C", (1, 5)) == 1.0
    assert chambers.boundary_distance("D", (0, 2)) == pytest.approx(2 / np.sqrt(2))


def test_reflection_group_order():
    assert chambers.reflection_group_order("C", 3) == 2**3 * 6
    assert chambers.reflection_group_order("D", 3) == 2**2 * 6


@pytest.mark.parametrize("z", ["C", "D"])
def test_h_antisymmetric_under_group(z):
    # h changes sign under each simple reflection of the group
    x = (1, 3, 7)
    for i, j in itertools.combinations(range(3), 2):
        y = list(x)
        y[i], y[j] = y[j], y[i]
        assert chambers.h(z, y) == -chambers.h(z, x)


def test_golden_values():
    assert chambers.contains("D", (-1.5, 1)) is False
    assert chambers.h("C", (1, 2, 3)) == 720
    assert chambers.h("D", (4, 4)) == 0
    assert chambers.h_det("C", (1, 2)) == 6
    assert chambers.h_det("D", (1, 2)) == 3
    assert chambers.h_det("D", (2, 2)) == 0
    assert chambers.h_smoothed("D", 2, (1, 2)) == 15
    assert chambers.h_smoothed("C", 2, (1, 2)) == 180
    assert chambers.h_smoothed("C", 3, (0, 0)) == 3**4
    assert chambers.in_auxiliary("C", 16, 0.25, (3, 7))
    assert not chambers.in_auxiliary("C", 16, 0.25, (1, 7))
    assert chambers.in_auxiliary("A", 1, 0.3, (0, 2)) and not chambers.in_auxiliary("A", 1, 0.3, (0, 1))


def test_empty_point_rejected():
    with pytest.raises(InvalidInputError):
        chambers.contains("C", ())
    with pytest.raises(InvalidInputError):
        chambers.h_smoothed("C", 0.0, (1, 2))
