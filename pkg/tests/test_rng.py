from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from weylwalk.rng import RandomStream, block_words, key_from_seed, philox4x64, words_to_uniform

u64 = st.integers(0, 2**64 - 1)


@given(u64, u64, st.integers(0, 1000))
def test_philox_matches_numpy(k0, k1, ctr):
    bg = np.random.Philox(key=np.array([k0, k1], dtype=np.uint64), counter=np.array([ctr, 0, 0, 0], dtype=np.uint64))
    expected = bg.random_raw(4)
    got = np.array([int(w) for w in philox4x64(ctr + 1, 0, 0, 0, k0, k1)], dtype=np.uint64)
    np.testing.assert_array_equal(got, expected)


def test_stream_words_are_contiguous():
    s = RandomStream(seed=5, index=3, substream=2)
    full = s.words(0, 20)
    np.testing.assert_array_equal(s.words(7, 6), full[7:13])
    assert int(block_words(5, 3, 2, 9)) == int(full[9])


def test_streams_are_distinct():
    a = RandomStream(1, 0, 0).words(0, 8)
    assert not np.array_equal(a, RandomStream(1, 1, 0).words(0, 8))
    assert not np.array_equal(a, RandomStream(1, 0, 1).words(0, 8))
    assert not np.array_equal(a, RandomStream(2, 0, 0).words(0, 8))


def test_uniform_range_and_normals():
    s = RandomStream(11)
    u = s.uniforms(0, 20000)
    assert u.min() >= 0.0 and u.max() < 1.0
    z = s.normals(0, 50000)
    assert abs(z.mean()) < 0.02
    assert abs(z.var() - 1.0) < 0.03


def test_words_to_uniform_edges():
    w = np.array([0, 2**64 - 1], dtype=np.uint64)
    u = words_to_uniform(w)
    assert u[0] == 0.0 and u[1] < 1.0


def test_key_from_seed():
    assert key_from_seed(3) == (3, 0)
    assert key_from_seed(2**64 + 1) == (1, 1)
    with pytest.raises(ValueError):
        key_from_seed(-1)
