import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binareye.bitcore import BinaryFeatureMap, BipolarVector, IntegerImage
from binareye.isa.compiler import conv_neuron_words, first_neuron_words, neuron_thresholds
from binareye.neuron_array import (
    FeatureMapSet,
    LayerKind,
    LayerWeights,
    conv_layer,
    fc_layer,
    first_layer,
    maxpool_stream,
    neuron_eval,
    subneuron_partial,
)
from binareye.oracle.model import DenseLayer
from binareye.oracle.reference import ref_conv_layer, ref_conv_naive, ref_fc, ref_first_layer, ref_pool
from binareye.trace import EventKind


def _signs(rng, shape):
    return rng.integers(0, 2, size=shape, dtype=np.int8) * 2 - 1


def _cnn(weights, thresholds, s, pool=False):
    return LayerWeights(LayerKind.CNN, s, conv_neuron_words(weights, s), neuron_thresholds(thresholds, s), pool)


def _first(weights, thresholds, s, pool=False):
    return LayerWeights(LayerKind.FIRST, s, first_neuron_words(weights, s), neuron_thresholds(thresholds, s), pool)


def _fmset(dense, s):
    return FeatureMapSet.split(BinaryFeatureMap.from_dense(dense), s)


def test_subneuron_partial_examples():
    rng = np.random.default_rng(3)
    w = BipolarVector.from_values(_signs(rng, 256))
    assert subneuron_partial(w, w) == 256
    assert subneuron_partial(w.complement(), w) == -256
    a_vals, w_vals = _signs(rng, 256), _signs(rng, 256)
    expected = sum(int(x) * int(y) for x, y in zip(a_vals, w_vals))
    got = subneuron_partial(BipolarVector.from_values(a_vals), BipolarVector.from_values(w_vals))
    assert got == expected and got % 2 == 0
    with pytest.raises(ValueError, match="256"):
        subneuron_partial(BipolarVector.from_values([1] * 255), BipolarVector.from_values([1] * 255))


def test_neuron_eval_examples():
    assert neuron_eval((256, 256, 256, 256), 1, (1024,)) == (1,)
    assert neuron_eval((256, -256, 0, 0), 2, (1, 0)) == (0, 1)
    assert neuron_eval((-2, -2, -2, -2), 4, (0, 0, 0, 0)) == (0, 0, 0, 0)
    with pytest.raises(ValueError, match="S-mode"):
        neuron_eval((0, 0, 0, 0), 3, (0, 0, 0))


def test_conv_output_size_and_phases():
    rng = np.random.default_rng(4)
    dense = _signs(rng, (256, 32, 32))
    layer = _cnn(_signs(rng, (1, 256, 256, 2, 2)), np.zeros((1, 256), int), 1)
    trace = []
    out = conv_layer(_fmset(dense, 1), layer, trace)
    assert (out.width, out.height) == (31, 31)
    assert sum(e.kind is EventKind.LD for e in trace) == 4


def test_conv_saturated_identity():
    dense = np.ones((256, 4, 3), np.int8)
    layer = _cnn(np.ones((1, 256, 256, 2, 2), np.int8), np.full((1, 256), 1024), 1)
    out = conv_layer(_fmset(dense, 1), layer).concat()
    assert (out.to_dense() == 1).all()


@pytest.mark.parametrize("s", [1, 2, 4])
def test_conv_matches_oracle(s):
    rng = np.random.default_rng(10 + s)
    per = 256 // s
    dense = _signs(rng, (256, 5, 5))
    weights = _signs(rng, (s, per, per, 2, 2))
    thr = rng.integers(-40, 41, size=(s, per))
    out = conv_layer(_fmset(dense, s), _cnn(weights, thr, s)).concat().to_dense()
    expected = ref_conv_layer(dense, DenseLayer("cnn", s, weights, thr))
    np.testing.assert_array_equal(out, expected)


def test_conv_matches_naive_loops():
    rng = np.random.default_rng(5)
    s, per = 4, 64
    dense = _signs(rng, (256, 3, 3))
    weights = _signs(rng, (s, per, per, 2, 2))
    thr = rng.integers(-20, 21, size=(s, per))
    out = conv_layer(_fmset(dense, s), _cnn(weights, thr, s)).concat().to_dense()
    for m in range(s):
        naive = ref_conv_naive(dense[m * per:(m + 1) * per], weights[m], thr[m])
        np.testing.assert_array_equal(out[m * per:(m + 1) * per], naive)


def test_conv_errors():
    rng = np.random.default_rng(6)
    layer = _cnn(_signs(rng, (2, 128, 128, 2, 2)), np.zeros((2, 128), int), 2)
    with pytest.raises(ValueError, match="S-mode mismatch"):
        conv_layer(_fmset(_signs(rng, (256, 3, 3)), 1), layer)
    with pytest.raises(ValueError, match="too small"):
        conv_layer(_fmset(_signs(rng, (256, 1, 3)), 2), layer)
    first = _first(_signs(rng, (128, 3, 2, 2)), np.zeros((2, 128), int), 2)
    with pytest.raises(ValueError, match="CNN weights"):
        conv_layer(_fmset(_signs(rng, (256, 3, 3)), 2), first)


def test_channel_mapping_law():
    # all weights -1 and a single +1 input channel c: only the map whose
    # sub-neurons consume c loses 4 agreements and drops below T = 4 * per
    for s in (1, 2, 4):
        per = 256 // s
        for c in (0, 63, 64, 130, 255):
            dense = -np.ones((256, 2, 2), np.int8)
            dense[c] = 1
            weights = -np.ones((s, per, per, 2, 2), np.int8)
            thr = np.full((s, per), 4 * per)
            out = conv_layer(_fmset(dense, s), _cnn(weights, thr, s)).concat().to_dense()[:, 0, 0]
            for m in range(s):
                assert (out[m * per:(m + 1) * per] == (-1 if m == c // per else 1)).all()


def test_feature_reuse_accounting():
    rng = np.random.default_rng(7)
    trace = []
    layer = _cnn(_signs(rng, (2, 128, 128, 2, 2)), np.zeros((2, 128), int), 2)
    conv_layer(_fmset(_signs(rng, (256, 6, 4)), 2), layer, trace)
    reads = [e.bits for e in trace if e.kind is EventKind.SRAM_RD and e.phase == 0]
    assert len(reads) == 5 * 3
    for row in range(3):
        first, rest = reads[row * 5], reads[row * 5 + 1:(row + 1) * 5]
        assert all(2 * r == first for r in rest)
    writes = [e.bits for e in trace if e.kind is EventKind.SRAM_WR]
    assert set(writes) == {64 * 2}
    lds = [e for e in trace if e.kind is EventKind.LD]
    assert [(e.bits, e.thr_bits) for e in lds] == [(65536, 64 * 2 * 12)] * 2


def test_maxpool_examples():
    zero = BinaryFeatureMap.from_dense(-np.ones((64, 4, 4), np.int8))
    assert (maxpool_stream(zero).to_dense() == -1).all()
    one = -np.ones((64, 4, 4), np.int8)
    one[5, 3, 2] = 1
    pooled = maxpool_stream(BinaryFeatureMap.from_dense(one)).to_dense()
    assert pooled[5, 1, 1] == 1 and pooled.sum() == -(64 * 4) + 2


def test_maxpool_odd_edges_against_max_oracle():
    rng = np.random.default_rng(8)
    dense = _signs(rng, (128, 13, 13))
    pooled = maxpool_stream(BinaryFeatureMap.from_dense(dense))
    assert (pooled.width, pooled.height) == (6, 6)
    expected = np.empty((128, 6, 6), np.int8)
    for c in range(128):
        for x in range(6):
            for y in range(6):
                expected[c, x, y] = max(dense[c, 2 * x + i, 2 * y + j] for i in (0, 1) for j in (0, 1))
    np.testing.assert_array_equal(pooled.to_dense(), expected)
    with pytest.raises(ValueError):
        maxpool_stream(BinaryFeatureMap.from_dense(dense[:, :1]))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 17), st.integers(2, 17), st.integers(0, 2**32 - 1))
def test_pooling_law(w, h, seed):
    dense = _signs(np.random.default_rng(seed), (64, w, h))
    pooled = maxpool_stream(BinaryFeatureMap.from_dense(dense)).to_dense()
    assert pooled.shape == (64, w // 2, h // 2)
    np.testing.assert_array_equal(pooled, ref_pool(dense))


def test_first_layer_zero_image():
    rng = np.random.default_rng(9)
    thr = rng.integers(-5, 6, size=(2, 128))
    layer = _first(_signs(rng, (128, 3, 2, 2)), thr, 2)
    out = first_layer(IntegerImage.zeros(), layer).concat().to_dense()
    assert out.shape == (256, 31, 31)
    expected = np.where(thr.reshape(-1) <= 0, 1, -1)
    assert (out == expected[:, None, None]).all()


def test_first_layer_single_pixel():
    pixels = np.zeros((3, 32, 32), np.int32)
    pixels[0, 0, 0] = 127
    weights = -np.ones((256, 3, 2, 2), np.int8)
    weights[:, 0, 0, 0] = 1
    # dot at output (0, 0) is +127 * 1 = 127; below 127 fires, above does not
    for t, bit in ((127, 1), (128, -1)):
        out = first_layer(IntegerImage(pixels), _first(weights, np.full((1, 256), t), 1)).concat().to_dense()
        assert (out[:, 0, 0] == bit).all()


@pytest.mark.parametrize("s", [1, 2, 4])
def test_first_layer_matches_oracle(s):
    rng = np.random.default_rng(20 + s)
    per = 256 // s
    pixels = rng.integers(0, 128, size=(3, 9, 7))
    weights = _signs(rng, (per, 3, 2, 2))
    thr = rng.integers(-300, 301, size=(s, per))
    out = first_layer(IntegerImage(pixels), _first(weights, thr, s)).concat().to_dense()
    np.testing.assert_array_equal(out, ref_first_layer(pixels, DenseLayer("first", s, weights, thr)))


def _fc(weights, biases):
    from binareye.bitcore import pack_bits

    return LayerWeights(LayerKind.FC, class_words=pack_bits((weights > 0).astype(np.uint8)),
                        class_biases=np.asarray(biases), n_bits=weights.shape[1])


def test_fc_identity_and_complement():
    rng = np.random.default_rng(11)
    dense = _signs(rng, (256, 4, 4))
    fm = BinaryFeatureMap.from_dense(dense)
    flat = fm.flat_bits().astype(np.int8) * 2 - 1
    scores, label = fc_layer(fm, _fc(np.stack([flat, -flat]), [0, 0]))
    assert scores == [4096, -4096] and label == 0


def test_fc_tie_goes_to_lowest_index():
    fm = BinaryFeatureMap.from_dense(np.ones((64, 1, 1), np.int8))
    w = np.ones((3, 64), np.int8)
    scores, label = fc_layer(fm, _fc(w, [0, 5, 5]))
    assert scores == [64, 69, 69] and label == 1


def test_fc_matches_oracle():
    rng = np.random.default_rng(12)
    dense = _signs(rng, (256, 3, 2))
    w = _signs(rng, (10, 256 * 6))
    b = rng.integers(-16, 17, size=10)
    got = fc_layer(BinaryFeatureMap.from_dense(dense), _fc(w, b))
    assert got == ref_fc(dense, DenseLayer("fc", 1, w, b))


def test_fc_errors():
    fm = BinaryFeatureMap.from_dense(np.ones((256, 5, 4), np.int8))
    with pytest.raises(ValueError, match="4096"):
        fc_layer(fm, _fc(np.ones((2, 4096), np.int8), [0, 0]))
    with pytest.raises(ValueError, match="class count"):
        _fc(np.ones((11, 64), np.int8), [0] * 11)


@pytest.mark.parametrize("s", [1, 2, 4])
def test_phase_count_law(s):
    rng = np.random.default_rng(13)
    per = 256 // s
    trace = []
    conv_layer(_fmset(_signs(rng, (256, 3, 3)), s),
               _cnn(_signs(rng, (s, per, per, 2, 2)), np.zeros((s, per), int), s), trace)
    assert sum(e.kind is EventKind.LD for e in trace) == 4 // s
    assert sum(e.kind is EventKind.CONV_STEP for e in trace) == (4 // s) * 4
