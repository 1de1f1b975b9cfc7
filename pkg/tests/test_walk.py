from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weylwalk import chambers
from weylwalk.errors import InvalidInputError
from weylwalk.rng import RandomStream
from weylwalk.walk import (
    PathSample,
    StepDistribution,
    annotate,
    entrance_time_nu,
    exit_time_tau,
    load_step_distribution,
    nu_exceedance_frequency,
    one_step_average,
    sample_path,
    sample_paths,
    sign_time_T,
    validate_assumptions,
)

F = Fraction


def sign_mask_table(k: int):
    """Independent signs times an exchangeable zero pattern (one zero or none)."""
    rows = {}
    masks = [tuple(1 for _ in range(k))] + [tuple(0 if i == j else 1 for i in range(k)) for j in range(k)]
    for mask in masks:
        pm = F(1, 2) if sum(mask) == k else F(1, 2 * k)
        for bits in range(2 ** k):
            signs = tuple(1 if (bits >> i) & 1 else -1 for i in range(k))
            vec = tuple(F(s * m) for s, m in zip(signs, mask))
            rows[vec] = rows.get(vec, F(0)) + pm / 2**k
    return StepDistribution.from_table(list(rows.items()), k)


def test_constructors_and_validation():
    d = StepDistribution.rademacher(2)
    assert d.is_discrete and d.is_iid
    assert d.moment(2) == 1 and d.moment(3) == 0
    with pytest.raises(InvalidInputError):
        StepDistribution.from_atoms([(1, F(1, 2)), (-1, F(1, 3))], 2)
    with pytest.raises(InvalidInputError):
        StepDistribution.from_table([((F(1), F(0)), F(1))], 2)


def test_assumption_golden():
    rep = validate_assumptions(StepDistribution.rademacher(2), "C", 2)
    assert rep.variance == 1 and all(m == 0 for _, m in rep.odd_moments) and rep.all_pass
    rep = validate_assumptions(StepDistribution.lazy(2), "C", 2)
    assert rep.variance == F(1, 2) and not rep.satisfied["NA"] and rep.satisfied["SA"]
    assert validate_assumptions(StepDistribution.gaussian(3), "D", 3).all_pass


def test_asymmetric_law_fails_symmetry():
    d = StepDistribution.from_atoms([(-1, F(2, 3)), (2, F(1, 3))], 2)
    rep = validate_assumptions(d, "C")
    assert rep.satisfied["NA"] is False or rep.satisfied["SA"] is False
    assert rep.odd_moments[1][1] != 0


def test_correlated_table_flagged():
    # exchangeable, symmetric marginals, but coordinates always share a sign
    d = StepDistribution.from_table([((F(1), F(1)), F(1, 2)), ((F(-1), F(-1)), F(1, 2))], 2)
    rep = validate_assumptions(d, "C")
    assert not rep.satisfied["SA"]
    assert one_step_average(d, "C", (1, 3)) != chambers.h("C", (1, 3))


@pytest.mark.parametrize("k", [2, 3])
def test_sign_mask_table_is_symmetric(k):
    d = sign_mask_table(k)
    assert d.is_conditionally_symmetric()
    rep = validate_assumptions(d, "C")
    assert rep.satisfied["SA"] and not rep.satisfied["NA"]


laws = st.sampled_from(["rademacher", "lazy", "table"])


@settings(max_examples=40)
@given(laws, st.sampled_from(["C", "D"]), st.integers(2, 3), st.data())
def test_martingale_identity(law, z, k, data):
    d = {"rademacher": StepDistribution.rademacher, "lazy": StepDistribution.lazy, "table": sign_mask_table}[law](k)
    x = tuple(data.draw(st.lists(st.integers(-20, 20), min_size=k, max_size=k)))
    assert one_step_average(d, z, x) == chambers.h(z, x)


def test_json_round_trip(tmp_path):
    for d in (StepDistribution.lazy(3), sign_mask_table(2), StepDistribution.gaussian(2, 0.5)):
        doc = d.to_json()
        assert StepDistribution.from_json(json.loads(json.dumps(doc))) == d
        p = tmp_path / "law.json"
        p.write_text(json.dumps(doc))
        assert load_step_distribution(str(p)) == d
        assert load_step_distribution(json.dumps(doc)) == d


def test_sample_path_basics():
    d = StepDistribution.rademacher(2)
    s = RandomStream(3, 0, 0)
    p0 = sample_path(d, (1, 2), 0, s)
    assert p0.n == 0 and np.array_equal(p0.positions, [[1.0, 2.0]])
    a, b = sample_path(d, (1, 2), 30, s), sample_path(d, (1, 2), 30, s)
    assert np.array_equal(a.steps, b.steps)
    batch = sample_paths(d, (1, 2), 30, 3, 0, 4)
    np.testing.assert_array_equal(batch[2], sample_path(d, (1, 2), 30, RandomStream(3, 2, 0)).positions)


def test_first_step_law_frequency():
    d = StepDistribution.rademacher(2)
    n = 100_000
    pos = sample_paths(d, (1, 2), 1, 9, 0, n)
    steps = pos[:, 1] - pos[:, 0]
    for s in [(-1, -1), (-1, 1), (1, -1), (1, 1)]:
        freq = np.mean(np.all(steps == s, axis=1))
        assert abs(freq - 0.25) < 3 * np.sqrt(0.25 * 0.75 / n)


@pytest.mark.parametrize("kind", ["gaussian", "uniform"])
def test_continuous_steps_moments(kind):
    d = StepDistribution.gaussian(1) if kind == "gaussian" else StepDistribution.uniform(1)
    pos = sample_paths(d, (0,), 1, 4, 0, 50_000)
    y = pos[:, 1, 0]
    assert abs(y.mean()) < 0.03 and abs(y.var() - 1.0) < 0.04


def test_stopping_time_golden():
    p = PathSample(start=[1, 2], steps=[[-1, 1]])
    assert exit_time_tau("C", p) == 1
    assert exit_time_tau("C", PathSample(start=[1, 2], steps=[[1, 1]])) is None
    assert exit_time_tau("C", PathSample(start=[0, 2], steps=[[1, 1]])) == 0
    assert sign_time_T("C", PathSample(start=[1, 2], steps=[[1, -1]])) == 1
    q = PathSample(start=[1, 7], steps=[[1, 1], [1, 1]])
    assert entrance_time_nu("C", 16, 0.25, q) == 2
    assert entrance_time_nu("C", 16, 0.25, PathSample(start=[3, 7], steps=np.zeros((0, 2)))) == 0
    assert entrance_time_nu("C", 16, 0.25, PathSample(start=[1, 7], steps=np.zeros((0, 2)))) is None
    a = annotate(q, "C", 16, 0.25)
    assert (a.tau, a.T, a.nu) == (None, None, 2)


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.sampled_from(["C", "D"]))
def test_exit_precedes_sign_time(seed, z):
    d = StepDistribution.lazy(3)
    p = annotate(sample_path(d, (1, 3, 6), 200, RandomStream(seed)), z)
    if p.T is not None:
        assert p.tau is not None and p.tau <= p.T


def test_nu_exceedance_decays():
    d = StepDistribution.rademacher(2)
    freq = nu_exceedance_frequency(d, "C", (1, 2), [64, 1024], 0.2, 2000, seed=1)
    assert freq[1] <= freq[0] + 0.02
