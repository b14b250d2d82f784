import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binareye import _pykernels, kernels

ck = pytest.importorskip("binareye._ckernels")


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_conv_partials_backends_agree(w, h, n, seed):
    rng = np.random.default_rng(seed)
    fmap = rng.integers(0, 2**64, size=(h, w, 4), dtype=np.uint64)
    weights = rng.integers(0, 2**64, size=(n, 16), dtype=np.uint64)
    a = ck.conv_partials(fmap, weights)
    b = _pykernels.conv_partials(fmap, weights)
    assert a.shape == (h - 1, w - 1, n, 4)
    np.testing.assert_array_equal(a, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 64), st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_fc_scores_backends_agree(words, classes, seed):
    rng = np.random.default_rng(seed)
    n_bits = 64 * words
    feats = rng.integers(0, 2**64, size=words, dtype=np.uint64)
    cls = rng.integers(0, 2**64, size=(classes, words), dtype=np.uint64)
    np.testing.assert_array_equal(ck.fc_scores(feats, cls, n_bits), _pykernels.fc_scores(feats, cls, n_bits))


def test_conv_partials_extremes():
    ones = np.full((2, 2, 4), 2**64 - 1, np.uint64)
    for mod in (ck, _pykernels):
        assert mod.conv_partials(ones, np.full((1, 16), 2**64 - 1, np.uint64)).tolist() == [[[[256] * 4]]]
        assert mod.conv_partials(ones, np.zeros((1, 16), np.uint64)).tolist() == [[[[-256] * 4]]]
