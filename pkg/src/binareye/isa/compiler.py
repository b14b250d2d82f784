"""Network-to-program compiler and the on-chip memory image layout.

Weight SRAM, per CNN layer, starting on a 128-byte row::

    phase 0 neurons 0..63, phase 1 neurons 0..63, ...   128 B per neuron
    256 thresholds as 12-bit two's complement, two per 3 bytes, (phase, neuron, map) order

A neuron's 16 little-endian uint64 words are ordered sub-neuron, dy, dx with
channel 0 at the LSB. FC SRAM holds one packed row per class; the class
biases sit in the FC logic block next to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from binareye.bitcore import pack_bits
from binareye.isa.instructions import (
    WB_ROW_BYTES,
    Bank,
    CNNInstr,
    FCInstr,
    IODir,
    IOInstr,
    ISAError,
    PROGRAM_SLOTS,
    Program,
)
from binareye.isa.netdesc import (
    FC_SRAM_BYTES,
    WEIGHT_SRAM_BYTES,
    NetworkDescription,
    check_constraints,
    layer_weight_bytes,
)
from binareye.oracle.model import DenseNet

NEURON_BYTES = 128
THRESHOLD_BYTES = 384


class CompileError(ISAError):
    pass


@dataclass(frozen=True)
class LayerEntry:
    kind: str  # "first", "cnn" or "fc"
    s_mode: int
    base: int  # byte offset into its SRAM
    length: int


@dataclass(frozen=True)
class MemoryImage:
    weight_sram: bytes = b""
    fc_sram: bytes = b""
    fc_biases: tuple = ()
    layers: tuple = ()

    def __post_init__(self):
        if len(self.weight_sram) > WEIGHT_SRAM_BYTES:
            raise CompileError(f"weight SRAM overflow: {len(self.weight_sram)} B > {WEIGHT_SRAM_BYTES} B")
        if len(self.fc_sram) > FC_SRAM_BYTES:
            raise CompileError(f"FC SRAM overflow: {len(self.fc_sram)} B > {FC_SRAM_BYTES} B")
        spans = sorted((e.base, e.base + e.length) for e in self.layers if e.kind != "fc")
        for (a0, a1), (b0, _) in zip(spans, spans[1:]):
            if b0 < a1:
                raise CompileError("overlapping layer regions in weight SRAM")
        for e in self.layers:
            limit = len(self.fc_sram) if e.kind == "fc" else len(self.weight_sram)
            if e.base < 0 or e.base + e.length > limit:
                raise CompileError(f"{e.kind} layer region [{e.base}, {e.base + e.length}) outside memory")


def pack_thresholds12(values) -> bytes:
    v = np.asarray(values, dtype=np.int64).reshape(-1)
    if v.size % 2:
        v = np.append(v, 0)
    if v.size and (v.min() < -2048 or v.max() > 2047):
        raise CompileError("threshold outside 12-bit signed range")
    u = (v & 0xFFF).astype(np.uint16)
    a, b = u[0::2], u[1::2]
    out = np.empty((a.size, 3), np.uint8)
    out[:, 0] = a & 0xFF
    out[:, 1] = (a >> 8) | ((b & 0xF) << 4)
    out[:, 2] = b >> 4
    return out.tobytes()


def unpack_thresholds12(data: bytes, count: int) -> np.ndarray:
    raw = np.frombuffer(data, np.uint8).reshape(-1, 3).astype(np.int64)
    a = raw[:, 0] | ((raw[:, 1] & 0xF) << 8)
    b = (raw[:, 1] >> 4) | (raw[:, 2] << 4)
    u = np.stack([a, b], axis=1).reshape(-1)[:count]
    return np.where(u >= 2048, u - 4096, u)


def _words_bytes(words: np.ndarray) -> bytes:
    return np.ascontiguousarray(words, dtype="<u8").tobytes()


def conv_neuron_words(weights: np.ndarray, s_mode: int) -> np.ndarray:
    """Dense ``[m, f, c, dy, dx]`` weights -> ``(4/S, 64, 16)`` neuron words."""
    phases = chunks = 4 // s_mode
    w = (np.asarray(weights) > 0).astype(np.uint8)
    # [m, p, j, q, c', dy, dx] with f = 64p + j and c = 64q + c'
    w = w.reshape(s_mode, phases, 64, chunks, 64, 2, 2)
    bits = w.transpose(1, 2, 0, 3, 5, 6, 4).reshape(phases, 64, 16, 64)
    return pack_bits(bits).reshape(phases, 64, 16)


def first_neuron_words(weights: np.ndarray, s_mode: int) -> np.ndarray:
    """Dense ``[f, c, dy, dx]`` first-layer weights -> neuron words, unused bits zero."""
    phases = 4 // s_mode
    w = (np.asarray(weights) > 0).astype(np.uint8).reshape(phases, 64, 3, 2, 2)
    bits = np.zeros((phases, 64, 16, 64), np.uint8)
    bits[:, :, 0:4, 0:3] = w.transpose(0, 1, 3, 4, 2).reshape(phases, 64, 4, 3)
    return pack_bits(bits).reshape(phases, 64, 16)


def neuron_thresholds(thresholds: np.ndarray, s_mode: int) -> np.ndarray:
    """``(S, F)`` -> ``(4/S, 64, S)`` indexed by phase, neuron, map."""
    t = np.asarray(thresholds, dtype=np.int64).reshape(s_mode, 4 // s_mode, 64)
    return t.transpose(1, 2, 0)


def read_layer_region(sram: bytes, base: int, s_mode: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of the per-layer packing: ``(words, thresholds)`` for the neuron array."""
    phases = 4 // s_mode
    n_w = phases * 64 * NEURON_BYTES
    end = base + n_w + THRESHOLD_BYTES
    if base < 0 or end > len(sram):
        raise CompileError(f"layer region [{base}, {end}) outside the {len(sram)} B weight image")
    words = np.frombuffer(sram, "<u8", count=n_w // 8, offset=base).astype(np.uint64)
    thr = unpack_thresholds12(sram[base + n_w:end], 256)
    return words.reshape(phases, 64, 16), thr.reshape(phases, 64, s_mode)


def read_fc_region(fc_sram: bytes, n_bits: int, classes: int) -> np.ndarray:
    n_bytes = classes * n_bits // 8
    if n_bytes > len(fc_sram):
        raise CompileError(f"FC region needs {n_bytes} B, image holds {len(fc_sram)} B")
    return np.frombuffer(fc_sram, "<u8", count=n_bytes // 8).astype(np.uint64).reshape(classes, n_bits // 64)


def _check_dense(net: NetworkDescription, dense: DenseNet):
    s = net.s_mode
    per = 256 // s
    cnns = net.cnn_layers
    expect = len(cnns) + (1 if net.fc is not None else 0)
    if len(dense.layers) != expect:
        raise CompileError(f"parameter set has {len(dense.layers)} layers, network has {expect}")
    if dense.s_mode != s:
        raise CompileError(f"parameter set S={dense.s_mode}, network S={s}")
    for i, (spec, layer) in enumerate(zip(net.layers, dense.layers)):
        if spec.type == "cnn":
            kind = "first" if i == 0 else "cnn"
            shape = (per, 3, 2, 2) if i == 0 else (s, per, per, 2, 2)
            if layer.kind != kind or np.shape(layer.weights) != shape:
                raise CompileError(f"layer {i}: expected {kind} weights of shape {shape}, "
                                   f"got {layer.kind} {np.shape(layer.weights)}")
            if np.shape(layer.thresholds) != (s, per):
                raise CompileError(f"layer {i}: thresholds must have shape {(s, per)}")
            if bool(layer.pool) != spec.pool:
                raise CompileError(f"layer {i}: pool flag differs from the network description")
        else:
            fw, fh = net.final_shape()
            shape = (spec.classes, 256 * fw * fh)
            if layer.kind != "fc" or np.shape(layer.weights) != shape:
                raise CompileError(f"layer {i}: expected fc weights of shape {shape}")
            if np.shape(layer.thresholds) != (spec.classes,):
                raise CompileError(f"layer {i}: one FC bias per class required")
        if not np.isin(layer.weights, (-1, 1)).all():
            raise CompileError(f"layer {i}: weights must be +1/-1")


def compile_network(net: NetworkDescription, dense: DenseNet) -> tuple[Program, MemoryImage]:
    problems = check_constraints(net)
    if problems:
        raise CompileError("; ".join(problems))
    _check_dense(net, dense)
    s = net.s_mode
    sram = bytearray()
    entries = []
    instrs = [IOInstr(IODir.IN, Bank.WEST)]
    in_bank = Bank.WEST
    geometry = net.geometry()
    for i, (w_in, h_in, _, _) in enumerate(geometry):
        layer = dense.layers[i]
        first = i == 0
        words = first_neuron_words(layer.weights, s) if first else conv_neuron_words(layer.weights, s)
        base = len(sram)
        sram += _words_bytes(words)
        sram += pack_thresholds12(neuron_thresholds(layer.thresholds, s))
        assert len(sram) - base == layer_weight_bytes(s)
        entries.append(LayerEntry("first" if first else "cnn", s, base, len(sram) - base))
        instrs.append(CNNInstr(s, w_in, h_in, bool(layer.pool), first, base // WB_ROW_BYTES,
                               in_bank, in_bank.other()))
        in_bank = in_bank.other()
    fc_bytes = b""
    biases = ()
    fc = dense.fc
    if fc is not None:
        n_bits = fc.weights.shape[1]
        fc_bytes = _words_bytes(pack_bits((np.asarray(fc.weights) > 0).astype(np.uint8)))
        b = np.asarray(fc.thresholds, dtype=np.int64)
        if b.min() < -32768 or b.max() > 32767:
            raise CompileError("FC bias outside 16-bit signed range")
        biases = tuple(int(v) for v in b)
        entries.append(LayerEntry("fc", s, 0, len(fc_bytes)))
        instrs.append(FCInstr(n_bits, fc.weights.shape[0]))
        if len(instrs) < PROGRAM_SLOTS:
            instrs.append(IOInstr(IODir.OUT_LABEL, Bank.WEST))
    elif len(instrs) < PROGRAM_SLOTS:
        instrs.append(IOInstr(IODir.OUT_MAP, in_bank))
    image = MemoryImage(bytes(sram), fc_bytes, biases, tuple(entries))
    return Program(tuple(instrs)), image


def program_layer_weights(program: Program, image: MemoryImage):
    """Decode the packed weights each CNN/FC instruction will load: yields ``(index, instr, LayerWeights)``."""
    from binareye.neuron_array import LayerKind, LayerWeights

    for idx, ins in enumerate(program):
        if isinstance(ins, CNNInstr):
            words, thr = read_layer_region(image.weight_sram, ins.weight_base * WB_ROW_BYTES, ins.s_mode)
            kind = LayerKind.FIRST if ins.first_layer else LayerKind.CNN
            yield idx, ins, LayerWeights(kind, ins.s_mode, words, thr, ins.pool)
        elif isinstance(ins, FCInstr):
            cw = read_fc_region(image.fc_sram, ins.feature_bits, ins.classes)
            biases = image.fc_biases[:ins.classes]
            if len(biases) != ins.classes:
                raise CompileError(f"FC needs {ins.classes} biases, image has {len(image.fc_biases)}")
            yield idx, ins, LayerWeights(LayerKind.FC, class_words=cw, class_biases=np.array(biases),
                                         n_bits=ins.feature_bits)
