from __future__ import annotations

import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weylwalk import chambers
from weylwalk.errors import BoundaryStartWarning, DegenerateConditioningError, InstanceTooLargeError, InvalidInputError
from weylwalk.exact import (
    LatticeWalkSpec,
    V_T_exact,
    V_exact,
    brute_force_check,
    conditional_distribution,
    conditioned_scaled_moments,
    restricted_expectation,
    run_dp,
    run_dp_exact,
    survival_probability,
    write_dp_csv,
    domination_ratios,
)

F = Fraction
RAD2 = LatticeWalkSpec.rademacher(2)


def test_survival_golden():
    assert survival_probability(RAD2, "C", (1, 2), 1) == F(1, 4)
    assert survival_probability(RAD2, "C", (1, 2), 2) == F(3, 16)
    assert survival_probability(RAD2, "D", (1, 2), 1) == F(3, 4)


def test_restricted_expectation_golden():
    assert restricted_expectation(RAD2, "C", (1, 2), 1) == F(15, 2)
    assert restricted_expectation(RAD2, "C", (1, 2), 0) == 6
    one = restricted_expectation(RAD2, "C", (1, 2), 3, f=lambda y: 1)
    assert one == survival_probability(RAD2, "C", (1, 2), 3)


def test_V_sequence_golden():
    res = V_exact(RAD2, "C", (1, 2), 2, mode="exact")
    assert res.sequence[0] == 6 and res.sequence[1] == 7.5
    assert res.identity_value == pytest.approx(res.value)


def test_conditional_law_golden():
    law = conditional_distribution(RAD2, "C", (1, 2), 1)
    assert law.exact == {(2, 3): 1}
    law = conditional_distribution(RAD2, "C", (1, 2), 2)
    assert law.exact == {(1, 2): F(1, 3), (1, 4): F(1, 3), (3, 4): F(1, 3)}
    assert conditional_distribution(RAD2, "C", (1, 2), 0).exact == {(1, 2): 1}


def test_degenerate_conditioning():
    spec = LatticeWalkSpec(((-3, F(1)),), 1)
    with pytest.raises(DegenerateConditioningError):
        conditional_distribution(spec, "C", (1,), 1)


def test_outside_start_warns_and_returns_zero():
    with pytest.warns(BoundaryStartWarning):
        assert survival_probability(RAD2, "C", (0, 2), 3) == 0
    with pytest.raises(InvalidInputError):
        survival_probability(RAD2, "C", (F(1, 2), 2), 3)
    with pytest.raises(InvalidInputError):
        V_exact(RAD2, "C", (2, 1), 5)


def test_brute_force_golden_and_limit():
    assert brute_force_check(RAD2, "C", (1, 2), 2).survival == F(3, 16)
    bf = brute_force_check(RAD2, "D", (1, 2), 3)
    run = run_dp_exact(RAD2, "D", (1, 2), 3)
    assert bf.survival == run.surv[3] and bf.restricted_h == run.surv_h[3]
    with pytest.raises(InstanceTooLargeError):
        brute_force_check(LatticeWalkSpec.lazy(3), "C", (1, 2, 3), 20)


@settings(max_examples=20)
@given(st.sampled_from(["C", "D"]), st.integers(-3, 3), st.integers(1, 4), st.integers(1, 5))
def test_dp_matches_brute_force(z, a, gap, n):
    spec = LatticeWalkSpec.lazy(2)
    x = (a, a + gap)
    if not chambers.contains(z, x):
        return
    bf = brute_force_check(spec, z, x, n)
    run = run_dp_exact(spec, z, x, n)
    assert bf.survival == run.surv[n]
    assert bf.restricted_h == run.surv_h[n]
    assert bf.exit_h == sum(run.exit_h, F(0))
    assert bf.law == dict(run.state.support)


@settings(max_examples=20)
@given(st.sampled_from(["C", "D"]), st.integers(0, 4), st.integers(1, 5), st.integers(0, 12))
def test_optional_stopping_identity_exact(z, a, gap, n):
    x = (a, a + gap)
    if not chambers.contains(z, x):
        return
    run = run_dp_exact(LatticeWalkSpec.lazy(2), z, x, n)
    # E[h(S(n)); tau > n] + E[h(S(tau)); tau <= n] = h(x)
    assert run.surv_h[n] + sum(run.exit_h, F(0)) == chambers.h(z, x)
    assert run.surv[n] + sum(run.exit_mass, F(0)) == 1


@settings(max_examples=15)
@given(st.sampled_from(["C", "D"]), st.integers(1, 5), st.integers(1, 6))
def test_float_dp_mass_conservation_and_monotone(z, a, gap):
    res = run_dp(LatticeWalkSpec.lazy(2), z, (a, a + gap), 150)
    assert res.mass_defect() < 1e-13
    # V_n is nondecreasing: h(S(tau)) <= 0 on the boundary for these chambers
    assert np.all(np.diff(res.surv_h) >= -1e-9 * res.surv_h[1:])
    assert np.all(np.diff(res.surv) <= 1e-15)


def test_float_matches_exact():
    n = 12
    run = run_dp_exact(RAD2, "D", (0, 3), n)
    res = run_dp(RAD2, "D", (0, 3), n)
    np.testing.assert_allclose(res.surv, [float(v) for v in run.surv], rtol=1e-13)
    np.testing.assert_allclose(res.surv_h, [float(v) for v in run.surv_h], rtol=1e-13)


def test_rational_start_on_shifted_lattice():
    spec = LatticeWalkSpec(RAD2.atoms, 2, lattice_shift=F(1, 2))
    x = (F(1, 2), F(5, 2))
    n = 6
    run = run_dp_exact(spec, "C", x, n)
    res = run_dp(spec, "C", x, n)
    assert res.surv[n] == pytest.approx(float(run.surv[n]), rel=1e-13)
    assert res.surv_h[n] == pytest.approx(float(run.surv_h[n]), rel=1e-13)


def test_V_deep_interior_close_to_h():
    res = V_exact(RAD2, "C", (100, 200), 10)
    h0 = float(chambers.h("C", (100, 200)))
    assert abs(res.value / h0 - 1) < 1e-6


def test_V_T_dominates_at_start():
    seq = V_T_exact(RAD2, "C", (1, 2), 4)
    assert seq[0] == 6 and len(seq) == 5


def test_checkpoint_extends_shorter_run(tmp_path):
    ck = tmp_path / "run.npz"
    spec = LatticeWalkSpec.lazy(2)
    full = run_dp(spec, "C", (1, 2), 60)
    assert run_dp(spec, "C", (1, 2), 30, checkpoint=ck, checkpoint_every=10).meta["resumed_from"] == 0
    longer = run_dp(spec, "C", (1, 2), 60, checkpoint=ck, checkpoint_every=20)
    assert longer.meta["resumed_from"] == 30
    np.testing.assert_allclose(longer.surv, full.surv, rtol=1e-14)
    np.testing.assert_allclose(longer.surv_h, full.surv_h, rtol=1e-14)
    again = run_dp(spec, "C", (1, 2), 60, checkpoint=ck)
    assert again.meta["resumed_from"] == 60


def test_checkpoint_ignores_other_runs(tmp_path):
    ck = tmp_path / "run.npz"
    run_dp(RAD2, "C", (1, 2), 20, checkpoint=ck)
    other = run_dp(RAD2, "C", (1, 4), 20, checkpoint=ck)
    assert other.meta["resumed_from"] == 0


def test_scaled_moments_and_csv(tmp_path):
    sm = conditioned_scaled_moments(LatticeWalkSpec.rademacher(1), "C", (1,), 400)
    assert sm.mean[0] == pytest.approx(np.sqrt(np.pi / 2), rel=0.03)
    res = run_dp(RAD2, "C", (1, 2), 20)
    out = tmp_path / "dp.csv"
    write_dp_csv(res, out, every=5)
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 5


@pytest.mark.parametrize("z, pts", [
    ("C", [(1, 2), (1, 5), (3, 4), (5, 20), (10, 40), (30, 31)]),
    ("D", [(0, 1), (-2, 3), (4, 9), (10, 40), (0, 30)]),
])
def test_V_dominated_by_smoothed_h(z, pts):
    r = domination_ratios(RAD2, z, pts, 300)
    # a single constant works near the walls and deep inside
    assert np.all(r > 0) and r.max() <= 1.0
