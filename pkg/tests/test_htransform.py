from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weylwalk import chambers
from weylwalk.errors import InvalidInputError, NumericalContractError
from weylwalk.exact import LatticeWalkSpec, V_exact, conditional_distribution
from weylwalk.htransform import (
    EstimateWithError,
    HFunction,
    build_V_table,
    conditioning_tv,
    doob_kernel,
    estimate_V_mc,
    estimate_V_plus_A,
    one_dim_V,
    sample_conditioned_path,
    tilde_V_C,
    transform_marginal,
)
from weylwalk.rng import RandomStream
from weylwalk.walk import StepDistribution

F = Fraction
RAD2 = LatticeWalkSpec.rademacher(2)


def V_D_rademacher(y) -> int:
    """Closed form of V for the D chamber and the k=2 sign walk."""
    u, v = int(y[1] - y[0]), int(y[1] + y[0])
    if not chambers.contains("D", (y[0], y[1])):
        return 0
    return u * v if u % 2 == 0 else (u + 1) * (v + 1)


@pytest.fixture(scope="module")
def table_C():
    return build_V_table(RAD2, "C")


def test_V_D_closed_form_matches_dp():
    res = V_exact(RAD2, "D", (1, 2), 800)
    assert res.extrapolated == pytest.approx(V_D_rademacher((1, 2)), rel=0.01)


@settings(max_examples=40)
@given(st.integers(-15, 15), st.integers(1, 15))
def test_doob_kernel_exact_normalisation(a, gap):
    x = (a, abs(a) + gap)
    ker = doob_kernel(RAD2, "D", V_D_rademacher, x, exact_arith=True)
    assert sum(ker.masses) == 1 and ker.residual == 0.0


def test_transform_identity_rational():
    x, n = (0, 3), 4
    law = transform_marginal(RAD2, "D", V_D_rademacher, x, n, exact_arith=True)
    from weylwalk.exact import run_dp_exact

    run = run_dp_exact(RAD2, "D", x, n)
    v0 = V_D_rademacher(x)
    expected = {y: w * V_D_rademacher(y) / v0 for y, w in run.state.support.items() if V_D_rademacher(y) > 0}
    assert {tuple(int(c) for c in y): w for y, w in law.items()} == {
        tuple(int(c) for c in y): w for y, w in expected.items()
    }
    assert sum(law.values()) == 1


def test_conditioning_converges_to_transform():
    x, n = (0, 3), 6
    tv200 = conditioning_tv(RAD2, "D", V_D_rademacher, x, n, 200)
    tv400 = conditioning_tv(RAD2, "D", V_D_rademacher, x, n, 400)
    assert tv400 < tv200 < 0.2


def test_V_table_regular_and_positive(table_C):
    assert np.all(table_C.values > 0)
    for y in [(1, 2), (3, 7), (10, 30), (40, 55)]:
        assert table_C.regularity_residual(y) < 1e-9
    assert table_C((2, 1)) == 0.0
    assert table_C((100, 200)) == float(chambers.h("C", (100, 200)))
    assert 0.0 <= table_C.boundary_quality <= 1.0


def test_V_table_agrees_with_dp(table_C):
    res = V_exact(RAD2, "C", (2, 5), 1000)
    assert table_C((2, 5)) == pytest.approx(res.extrapolated, rel=0.02)


def test_V_table_csv(table_C, tmp_path):
    out = tmp_path / "v.csv"
    table_C.to_csv(out)
    rows = out.read_text().splitlines()
    assert rows[0] == "x1,x2,V" and len(rows) == len(table_C) + 1


def test_doob_kernel_single_target(table_C):
    ker = doob_kernel(RAD2, "C", table_C, (1, 2))
    assert ker.targets == [(2, 3)] and ker.masses == [1.0]


def test_conditioned_paths_stay_inside(table_C):
    path, resid = sample_conditioned_path(RAD2, "C", table_C, (1, 2), 100, RandomStream(5))
    assert chambers.contains("C", path.positions).all()
    assert max(abs(r) for r in resid) < 1e-9


def test_hfunction_contract():
    hf = HFunction(lambda y: -1.0, "h_Z", chambers.ChamberType.C)
    with pytest.raises(NumericalContractError):
        hf((1, 2))
    assert HFunction.from_h("C")((1, 2)) == 6


def test_estimate_arithmetic():
    a = EstimateWithError(2.0, 0.1, 100, 10)
    b = EstimateWithError(3.0, 0.2, 50, 10)
    c = a * b
    assert c.value == 6.0 and c.n_samples == 100
    assert c.std_error == pytest.approx(np.hypot(0.1 * 3, 0.2 * 2))


def test_V_mc_agrees_with_dp():
    d = StepDistribution.rademacher(2)
    est = estimate_V_mc(d, "C", (1, 2), horizon=200, samples=100_000, seed=3)
    dp = V_exact(RAD2, "C", (1, 2), 200).value
    assert abs(est.value - dp) < 3 * est.std_error
    with pytest.raises(InvalidInputError):
        estimate_V_mc(d, "C", (0, 2))


def test_V_mc_deep_interior():
    est = estimate_V_mc(StepDistribution.rademacher(2), "C", (50, 100), horizon=200, samples=2000, seed=1)
    assert 0.9 <= est.value / chambers.h("C", (50, 100)) <= 1.1


def test_one_dim_V():
    d = StepDistribution.rademacher(1)
    assert one_dim_V(d, 7).value == 7.0
    with pytest.raises(InvalidInputError):
        one_dim_V(d, 0)
    lazy2 = StepDistribution.from_atoms([(-2, F(1, 4)), (0, F(1, 2)), (2, F(1, 4))], 1)
    v = one_dim_V(lazy2, 300).value
    assert v / 300 == pytest.approx(1.0, rel=0.02)
    g = one_dim_V(StepDistribution.gaussian(1), 1.0, horizon=400, samples=20_000, seed=2)
    assert 0 < g.value < 1 + np.sqrt(2 / np.pi) and g.std_error > 0


def test_V_plus_A():
    d = StepDistribution.rademacher(1)
    assert estimate_V_plus_A(d, (3,)).value == 1.0
    d2 = StepDistribution.rademacher(2)
    est = estimate_V_plus_A(d2, (1, 2), horizon=200, samples=5000, seed=1)
    assert est.value > 0
    deep = estimate_V_plus_A(d2, (30, 90), horizon=100, samples=2000, seed=1)
    assert deep.value == pytest.approx(60.0, rel=0.02)


def test_tilde_collapses_in_one_dimension():
    d = StepDistribution.rademacher(1)
    for z in (1, 2, 5, 11):
        assert tilde_V_C(d, (z,)).value == z


def test_conditional_law_against_transform_mean():
    # the n=2 conditional law and the transform marginal are different objects
    law = conditional_distribution(RAD2, "C", (1, 2), 2)
    assert law.probs.sum() == pytest.approx(1.0)
