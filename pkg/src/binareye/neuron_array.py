"""Functional model of the 64-neuron array.

Each neuron holds 1024 weight bits split into four sub-neurons of
64 channels x 2x2 positions. Sub-neuron ``k`` always consumes channels
``[64k, 64k+64)`` of the 256-channel concatenated input. Depending on the
width mode S the four partial sums are combined into S output bits, one per
feature map:

* S=1: ``p0+p1+p2+p3`` -> map 0
* S=2: ``p0+p1`` -> map 0, ``p2+p3`` -> map 1
* S=4: ``pj`` -> map j

A layer with F = 256/S features per map runs 4/S load/convolve phases; phase
``p`` produces features ``[64p, 64p+64)`` of every map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from binareye import kernels
from binareye.bitcore import (
    BinaryFeatureMap,
    BipolarVector,
    IntegerImage,
    bipolar_dot,
    pack_bits,
    sign_threshold,
)
from binareye.trace import EventKind, TraceEvent

N_NEURONS = 64
SUBNEURONS = 4
NEURON_WORDS = 16
NEURON_BITS = 1024
ARRAY_CHANNELS = 256
S_MODES = (1, 2, 4)
THRESHOLD_BITS = 12
THRESHOLD_RANGE = (-(1 << 11), (1 << 11) - 1)
FC_BIAS_RANGE = (-(1 << 15), (1 << 15) - 1)
FC_MAX_BITS = 4096
FC_CLASSES = (2, 10)

# first-layer weights live in channels 0..2 of each of sub-neuron 0's four words
FIRST_LAYER_MASK = np.uint64(0b111)


class LayerKind(str, Enum):
    FIRST = "FIRST"
    CNN = "CNN"
    FC = "FC"


def check_s_mode(s: int) -> int:
    if s not in S_MODES:
        raise ValueError(f"invalid S-mode {s}; expected one of {S_MODES}")
    return s


def n_phases(s: int) -> int:
    return 4 // check_s_mode(s)


def features_per_map(s: int) -> int:
    return ARRAY_CHANNELS // check_s_mode(s)


@dataclass(frozen=True, eq=False)
class NeuronWeights:
    """One neuron's flip-flop contents: 16 words plus S thresholds."""

    subweights: np.ndarray
    thresholds: tuple[int, ...]

    def __post_init__(self):
        w = np.asarray(self.subweights, dtype=np.uint64).reshape(-1)
        if w.size != NEURON_WORDS:
            raise ValueError(f"neuron needs exactly {NEURON_BITS} weight bits")
        if len(self.thresholds) not in S_MODES:
            raise ValueError("neuron carries 1, 2 or 4 thresholds")
        lo, hi = THRESHOLD_RANGE
        for t in self.thresholds:
            if not lo <= t <= hi:
                raise ValueError(f"threshold {t} outside 12-bit signed range")
        w.setflags(write=False)
        object.__setattr__(self, "subweights", w)

    def subneuron(self, k: int) -> BipolarVector:
        return BipolarVector(256, self.subweights[4 * k:4 * k + 4])


@dataclass(frozen=True, eq=False)
class LayerWeights:
    """Packed parameters for one layer.

    CNN/FIRST: ``words`` is ``(4/S, 64, 16)`` uint64 and ``thresholds`` is
    ``(4/S, 64, S)``. FC: ``class_words`` is ``(classes, n_bits/64)`` and
    ``class_biases`` holds one int per class.
    """

    kind: LayerKind
    s_mode: int = 1
    words: Optional[np.ndarray] = None
    thresholds: Optional[np.ndarray] = None
    pool: bool = False
    class_words: Optional[np.ndarray] = None
    class_biases: Optional[np.ndarray] = None
    n_bits: int = 0

    def __post_init__(self):
        check_s_mode(self.s_mode)
        if self.kind is LayerKind.FC:
            self._check_fc()
            return
        phases = n_phases(self.s_mode)
        w = np.asarray(self.words, dtype=np.uint64)
        t = np.asarray(self.thresholds, dtype=np.int64)
        if w.shape != (phases, N_NEURONS, NEURON_WORDS):
            raise ValueError(f"weights must have shape {(phases, N_NEURONS, NEURON_WORDS)}, got {w.shape}")
        if t.shape != (phases, N_NEURONS, self.s_mode):
            raise ValueError(f"thresholds must have shape {(phases, N_NEURONS, self.s_mode)}, got {t.shape}")
        lo, hi = THRESHOLD_RANGE
        if t.size and (t.min() < lo or t.max() > hi):
            raise ValueError("threshold outside 12-bit signed range")
        object.__setattr__(self, "words", w)
        object.__setattr__(self, "thresholds", t)

    def _check_fc(self):
        cw = np.asarray(self.class_words, dtype=np.uint64)
        cb = np.asarray(self.class_biases, dtype=np.int64).reshape(-1)
        if cw.ndim != 2:
            raise ValueError("class weights must be 2-D (classes, words)")
        classes = cw.shape[0]
        if not FC_CLASSES[0] <= classes <= FC_CLASSES[1]:
            raise ValueError(f"class count {classes} outside 2..10")
        if not 0 < self.n_bits <= FC_MAX_BITS:
            raise ValueError(f"FC feature length {self.n_bits} exceeds {FC_MAX_BITS} bits")
        if cw.shape[1] != -(-self.n_bits // 64):
            raise ValueError("class weight words do not match feature length")
        if cb.size != classes:
            raise ValueError("one bias per class required")
        lo, hi = FC_BIAS_RANGE
        if cb.min() < lo or cb.max() > hi:
            raise ValueError("FC bias outside 16-bit signed range")
        object.__setattr__(self, "class_words", cw)
        object.__setattr__(self, "class_biases", cb)

    @property
    def phases(self) -> int:
        return n_phases(self.s_mode)

    @property
    def n_classes(self) -> int:
        return self.class_words.shape[0]

    def neuron(self, phase: int, j: int) -> NeuronWeights:
        return NeuronWeights(self.words[phase, j], tuple(int(t) for t in self.thresholds[phase, j]))


@dataclass(frozen=True)
class FeatureMapSet:
    """S parallel maps of 256/S channels each, sharing W x H."""

    maps: tuple[BinaryFeatureMap, ...]

    def __post_init__(self):
        s = len(self.maps)
        check_s_mode(s)
        shapes = {(m.channels, m.width, m.height) for m in self.maps}
        if len(shapes) != 1 or next(iter(shapes))[0] * s != ARRAY_CHANNELS:
            raise ValueError("maps must share shape and fill 256 channels together")

    @property
    def s_mode(self) -> int:
        return len(self.maps)

    @property
    def width(self) -> int:
        return self.maps[0].width

    @property
    def height(self) -> int:
        return self.maps[0].height

    def concat(self) -> BinaryFeatureMap:
        """Stack the maps along channels into one 256-channel map."""
        payload = np.concatenate([m.payload for m in self.maps], axis=-1)
        return BinaryFeatureMap(ARRAY_CHANNELS, self.width, self.height, payload)

    @classmethod
    def split(cls, fm: BinaryFeatureMap, s: int) -> "FeatureMapSet":
        if fm.channels != ARRAY_CHANNELS:
            raise ValueError("only a 256-channel map can be split into S maps")
        per = 4 // check_s_mode(s)
        return cls(tuple(
            BinaryFeatureMap(ARRAY_CHANNELS // s, fm.width, fm.height, fm.payload[:, :, m * per:(m + 1) * per])
            for m in range(s)
        ))


def subneuron_partial(window: BipolarVector, subweights: BipolarVector) -> int:
    """Dot product of one 64 x 2 x 2 patch with one sub-neuron's weights."""
    if window.length != 256 or subweights.length != 256:
        raise ValueError("sub-neuron operands must hold exactly 64x2x2 = 256 values")
    return bipolar_dot(window, subweights)


def neuron_eval(partials: Sequence[int], s_mode: int, thresholds: Sequence[int]) -> tuple[int, ...]:
    check_s_mode(s_mode)
    if len(partials) != SUBNEURONS:
        raise ValueError("a neuron has 4 sub-neuron partials")
    if len(thresholds) != s_mode:
        raise ValueError(f"S={s_mode} needs {s_mode} thresholds, got {len(thresholds)}")
    group = SUBNEURONS // s_mode
    return tuple(
        sign_threshold(sum(partials[m * group:(m + 1) * group]), thresholds[m])
        for m in range(s_mode)
    )


def _combine(partials: np.ndarray, s_mode: int) -> np.ndarray:
    """``(..., 4)`` partials -> ``(..., S)`` per-map sums."""
    return partials.reshape(partials.shape[:-1] + (s_mode, SUBNEURONS // s_mode)).sum(axis=-1)


def _emit_conv_phase(trace, layer, phase, s_mode, wo, ho, read_first, read_next):
    ops = 2 * NEURON_BITS * N_NEURONS // s_mode
    wr = N_NEURONS * s_mode
    trace.append(TraceEvent(EventKind.LD, layer, phase, N_NEURONS * NEURON_BITS, 0,
                            N_NEURONS * s_mode * THRESHOLD_BITS))
    rd = TraceEvent(EventKind.SRAM_RD, layer, phase, read_next)
    rd0 = TraceEvent(EventKind.SRAM_RD, layer, phase, read_first)
    step = TraceEvent(EventKind.CONV_STEP, layer, phase, 0, ops)
    write = TraceEvent(EventKind.SRAM_WR, layer, phase, wr)
    row = [rd0, step, write] + [rd, step, write] * (wo - 1)
    trace.extend(row * ho)


def _pack_outputs(bits: np.ndarray) -> BinaryFeatureMap:
    """``(Ho, Wo, 256)`` {0,1} concatenated-channel bits -> packed map."""
    ho, wo, _ = bits.shape
    return BinaryFeatureMap(ARRAY_CHANNELS, wo, ho, pack_bits(bits.astype(np.uint8)))


def _scatter_phase(out: np.ndarray, phase: int, bits: np.ndarray, s_mode: int):
    # bits: (Ho, Wo, 64 neurons, S); neuron j of phase p feeds feature 64p+j of each map
    per_map = features_per_map(s_mode)
    for m in range(s_mode):
        base = m * per_map + N_NEURONS * phase
        out[:, :, base:base + N_NEURONS] = bits[:, :, :, m]


def conv_layer(inputs: FeatureMapSet, weights: LayerWeights, trace: Optional[list] = None,
               layer: int = 0) -> FeatureMapSet:
    """Stride-1 valid 2x2 binary convolution, with optional streamed pooling."""
    if weights.kind is not LayerKind.CNN:
        raise ValueError(f"conv_layer needs CNN weights, got {weights.kind.value}")
    if weights.s_mode != inputs.s_mode:
        raise ValueError(f"S-mode mismatch: weights S={weights.s_mode}, inputs S={inputs.s_mode}")
    w, h = inputs.width, inputs.height
    if w < 2 or h < 2:
        raise ValueError(f"input {w}x{h} too small for a 2x2 convolution")
    s = weights.s_mode
    fmap = np.ascontiguousarray(inputs.concat().payload)
    out = np.zeros((h - 1, w - 1, ARRAY_CHANNELS), np.uint8)
    for phase in range(weights.phases):
        # LD: the phase's weights become the flip-flop contents
        ff_words = np.ascontiguousarray(weights.words[phase])
        ff_thr = weights.thresholds[phase]
        partials = kernels.conv_partials(fmap, ff_words)
        bits = _combine(partials, s) >= ff_thr[None, None, :, :]
        _scatter_phase(out, phase, bits, s)
        if trace is not None:
            _emit_conv_phase(trace, layer, phase, s, w - 1, h - 1,
                             4 * ARRAY_CHANNELS, 2 * ARRAY_CHANNELS)
    result = _pack_outputs(out)
    if weights.pool:
        result = maxpool_stream(result)
    return FeatureMapSet.split(result, s)


def maxpool_stream(fm: BinaryFeatureMap) -> BinaryFeatureMap:
    """2x2 stride-2 max-pool; for bit 1 = +1 the max is a bitwise OR. Odd edges drop."""
    if fm.width < 2 or fm.height < 2:
        raise ValueError(f"cannot pool a {fm.width}x{fm.height} map")
    wo, ho = fm.width // 2, fm.height // 2
    p = fm.payload[:2 * ho, :2 * wo]
    pooled = p[0::2, 0::2] | p[0::2, 1::2] | p[1::2, 0::2] | p[1::2, 1::2]
    return BinaryFeatureMap(fm.channels, wo, ho, pooled)


def first_layer_weights(words: np.ndarray) -> np.ndarray:
    """Decode ``(..., 16)`` neuron words into ``(..., 3, 2, 2)`` +1/-1 weights ``[c, dy, dx]``."""
    sub0 = np.asarray(words, dtype=np.uint64)[..., 0:4].reshape(words.shape[:-1] + (2, 2))
    bits = np.stack([(sub0 >> np.uint64(c)) & np.uint64(1) for c in range(3)], axis=-3)
    return bits.astype(np.int32) * 2 - 1


def first_layer(image: IntegerImage, weights: LayerWeights, trace: Optional[list] = None,
                layer: int = 0) -> FeatureMapSet:
    """Multi-bit input layer.

    Each neuron computes one integer dot of its 12 weights with a 3 x 2 x 2
    pixel patch and applies its S thresholds, giving one bit per map.
    """
    if weights.kind is not LayerKind.FIRST:
        raise ValueError(f"first_layer needs FIRST weights, got {weights.kind.value}")
    w, h = image.width, image.height
    if w < 2 or h < 2:
        raise ValueError(f"image {w}x{h} too small for a 2x2 convolution")
    s = weights.s_mode
    pix = image.pixels.astype(np.int64)
    out = np.zeros((h - 1, w - 1, ARRAY_CHANNELS), np.uint8)
    for phase in range(weights.phases):
        wts = first_layer_weights(weights.words[phase]).astype(np.int64)  # (64, 3, 2, 2)
        dot = np.zeros((h - 1, w - 1, N_NEURONS), np.int64)
        for dy in (0, 1):
            for dx in (0, 1):
                patch = pix[:, dx:dx + w - 1, dy:dy + h - 1]  # (3, Wo, Ho)
                dot += np.einsum("cxy,nc->yxn", patch, wts[:, :, dy, dx])
        bits = dot[:, :, :, None] >= weights.thresholds[phase][None, None, :, :]
        _scatter_phase(out, phase, bits, s)
        if trace is not None:
            _emit_conv_phase(trace, layer, phase, s, w - 1, h - 1, 4 * 3 * 7, 2 * 3 * 7)
    result = _pack_outputs(out)
    if weights.pool:
        result = maxpool_stream(result)
    return FeatureMapSet.split(result, s)


def fc_layer(features: BinaryFeatureMap, weights: LayerWeights,
             trace: Optional[list] = None, layer: int = 0) -> tuple[list[int], int]:
    """Binary fully-connected classifier over the map's storage-order bits."""
    if weights.kind is not LayerKind.FC:
        raise ValueError(f"fc_layer needs FC weights, got {weights.kind.value}")
    n = features.n_bits
    if n > FC_MAX_BITS:
        raise ValueError(f"FC feature length {n} exceeds {FC_MAX_BITS} bits")
    if n != weights.n_bits:
        raise ValueError(f"feature length {n} does not match FC layer ({weights.n_bits} bits)")
    flat = pack_bits(features.flat_bits())
    dots = kernels.fc_scores(np.ascontiguousarray(flat), np.ascontiguousarray(weights.class_words), n)
    scores = [int(v) for v in dots + weights.class_biases]
    label = int(np.argmax(scores))
    if trace is not None:
        trace.append(TraceEvent(EventKind.FC_EVAL, layer, 0, n * weights.n_classes,
                                2 * n * weights.n_classes))
    return scores, label
