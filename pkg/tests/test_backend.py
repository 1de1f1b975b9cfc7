from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weylwalk import backend
from weylwalk.exact import LatticeWalkSpec, run_dp
from weylwalk.walk import StepDistribution

needs_cython = pytest.mark.skipif("cython" not in backend.available_backends(), reason="compiled kernels not built")


def test_default_backend_name():
    assert backend.BACKEND in backend.available_backends()
    with pytest.raises(ValueError):
        backend.get_backend("fortran")


@needs_cython
@settings(max_examples=15)
@given(st.sampled_from(["C", "D"]), st.integers(1, 4), st.integers(2, 6), st.integers(0, 2**32))
def test_mc_backends_bit_identical(z, a, gap, seed):
    dist = StepDistribution.lazy(2)
    values, cum, iid = dist.sampling_arrays()
    x = np.array([float(a), float(a + gap)])
    args = (values, cum, iid, 1 if z == "C" else 2, x, 60, seed, 0, 0, 5, 300)
    t1, p1 = backend.mc_exit_discrete(*args, backend="python")
    t2, p2 = backend.mc_exit_discrete(*args, backend="cython")
    np.testing.assert_array_equal(t1, t2)
    np.testing.assert_array_equal(p1, p2)


@needs_cython
@pytest.mark.parametrize("z, x", [("C", (1,)), ("C", (1, 2)), ("D", (0, 3)), ("C", (1, 2, 4))])
def test_dp_backends_agree(z, x):
    spec = LatticeWalkSpec.lazy(len(x))
    r1 = run_dp(spec, z, x, 40, backend="python")
    r2 = run_dp(spec, z, x, 40, backend="cython")
    np.testing.assert_allclose(r1.surv, r2.surv, rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(r1.surv_h, r2.surv_h, rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(r1.exit_h, r2.exit_h, rtol=1e-12, atol=1e-12)
