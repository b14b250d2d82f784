"""Program execution against the weight SRAM, ping-pong feature banks and FC SRAM."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from binareye.bitcore import BinaryFeatureMap, IntegerImage
from binareye.isa.compiler import (
    MemoryImage,
    read_fc_region,
    read_layer_region,
)
from binareye.isa.instructions import (
    WB_ROW_BYTES,
    Bank,
    CNNInstr,
    FCInstr,
    IODir,
    IOInstr,
    Program,
)
from binareye.isa.netdesc import BANK_BITS, FC_SRAM_BYTES, WEIGHT_SRAM_BYTES
from binareye.neuron_array import (
    ARRAY_CHANNELS,
    FeatureMapSet,
    LayerKind,
    LayerWeights,
    conv_layer,
    fc_layer,
    first_layer,
)
from binareye.trace import EventKind, TraceEvent, program_hash

BANK_WORDS = BANK_BITS // 64


class SimulationError(RuntimeError):
    pass


@dataclass
class LayerSummary:
    index: int
    kind: str
    in_shape: tuple
    out_shape: tuple
    phases: int = 0
    conv_steps: int = 0
    ld_bits: int = 0
    ops: int = 0


@dataclass
class MachineState:
    weight_sram: bytes
    fc_sram: bytes
    fc_biases: tuple
    program: Optional[Program] = None
    pc: int = 0
    banks: list = field(default_factory=lambda: [np.zeros(BANK_WORDS, np.uint64) for _ in Bank])
    bank_shape: list = field(default_factory=lambda: [None, None])
    staged: Optional[IntegerImage] = None
    input_image: Optional[IntegerImage] = None
    # flip-flop bank: the phase of weights most recently loaded
    ff_words: Optional[np.ndarray] = None
    ff_thresholds: Optional[np.ndarray] = None
    last_out_bank: Optional[Bank] = None
    scores: list = field(default_factory=list)
    label: int = -1
    output_map: Optional[BinaryFeatureMap] = None
    trace: Optional[list] = field(default_factory=list)
    summaries: list = field(default_factory=list)
    layer_maps: Optional[list] = None
    done: bool = False


@dataclass
class RunResult:
    label: int
    scores: list
    trace: list
    summaries: list
    output_map: Optional[BinaryFeatureMap] = None
    layer_maps: Optional[list] = None
    program_hash: str = ""


def load_memory_image(img: MemoryImage, program: Optional[Program] = None) -> MachineState:
    if len(img.weight_sram) > WEIGHT_SRAM_BYTES:
        raise SimulationError(f"weight image {len(img.weight_sram)} B exceeds {WEIGHT_SRAM_BYTES} B")
    if len(img.fc_sram) > FC_SRAM_BYTES:
        raise SimulationError(f"FC image {len(img.fc_sram)} B exceeds {FC_SRAM_BYTES} B")
    sram = img.weight_sram + bytes(WEIGHT_SRAM_BYTES - len(img.weight_sram))
    fc = img.fc_sram + bytes(FC_SRAM_BYTES - len(img.fc_sram))
    return MachineState(sram, fc, tuple(img.fc_biases), program)


def _store(state: MachineState, bank: Bank, fm: BinaryFeatureMap):
    words = fm.words
    if words.size > BANK_WORDS:
        raise SimulationError(f"map of {fm.n_bits} bits does not fit a {BANK_BITS}-bit bank")
    state.banks[bank][:words.size] = words
    state.bank_shape[bank] = (fm.width, fm.height)


def _fetch(state: MachineState, bank: Bank) -> BinaryFeatureMap:
    shape = state.bank_shape[bank]
    if shape is None:
        raise SimulationError(f"bank {bank.name} holds no feature map")
    w, h = shape
    n = w * h * (ARRAY_CHANNELS // 64)
    return BinaryFeatureMap(ARRAY_CHANNELS, w, h, state.banks[bank][:n].copy())


def _exec_cnn(state: MachineState, ins: CNNInstr, idx: int):
    base = ins.weight_base * WB_ROW_BYTES
    words, thr = read_layer_region(state.weight_sram, base, ins.s_mode)
    kind = LayerKind.FIRST if ins.first_layer else LayerKind.CNN
    weights = LayerWeights(kind, ins.s_mode, words, thr, ins.pool)
    if ins.first_layer:
        img = state.staged
        if img is None:
            raise SimulationError(f"instruction {idx}: FIRST layer without a staged input image")
        if (img.width, img.height) != (ins.width, ins.height):
            raise SimulationError(f"instruction {idx}: image is {img.width}x{img.height}, "
                                  f"instruction expects {ins.width}x{ins.height}")
        out = first_layer(img, weights, state.trace, idx)
    else:
        if state.bank_shape[ins.in_bank] != (ins.width, ins.height):
            raise SimulationError(f"instruction {idx}: bank {ins.in_bank.name} holds "
                                  f"{state.bank_shape[ins.in_bank]}, instruction expects "
                                  f"{(ins.width, ins.height)}")
        fm = FeatureMapSet.split(_fetch(state, ins.in_bank), ins.s_mode)
        out = conv_layer(fm, weights, state.trace, idx)
    state.ff_words = words[-1]
    state.ff_thresholds = thr[-1]
    result = out.concat()
    _store(state, ins.out_bank, result)
    state.last_out_bank = ins.out_bank
    if state.layer_maps is not None:
        state.layer_maps.append(result)
    phases = weights.phases
    steps = (ins.width - 1) * (ins.height - 1)
    summary = LayerSummary(idx, kind.value, (ins.width, ins.height), (result.width, result.height),
                           phases, phases * steps, phases * 64 * 1024,
                           phases * steps * 2 * 1024 * 64 // ins.s_mode)
    state.summaries.append(summary)


def step(state: MachineState) -> MachineState:
    """Execute the instruction at ``pc``; the state is updated in place and returned."""
    prog = state.program
    if prog is None or state.pc >= len(prog):
        raise SimulationError("pc past end of program")
    idx = state.pc
    ins = prog[idx]
    trace = state.trace
    if isinstance(ins, IOInstr):
        if ins.direction is IODir.IN:
            if state.input_image is None:
                raise SimulationError("IO IN with no input image supplied")
            state.staged = state.input_image
            if trace is not None:
                trace.append(TraceEvent(EventKind.IO, idx, 0, state.staged.n_bits))
            state.summaries.append(LayerSummary(idx, "IO_IN", (state.staged.width, state.staged.height),
                                                (state.staged.width, state.staged.height)))
        elif ins.direction is IODir.OUT_LABEL:
            if not state.scores:
                raise SimulationError(f"instruction {idx}: IO OUT_LABEL before any FC result")
            if trace is not None:
                trace.append(TraceEvent(EventKind.IO, idx, 0, 4))
            state.summaries.append(LayerSummary(idx, "IO_OUT_LABEL", (), ()))
            state.done = True
        else:
            fm = _fetch(state, ins.bank)
            state.output_map = fm
            if trace is not None:
                trace.append(TraceEvent(EventKind.IO, idx, 0, fm.n_bits))
            state.summaries.append(LayerSummary(idx, "IO_OUT_MAP", (fm.width, fm.height), (fm.width, fm.height)))
            state.done = True
    elif isinstance(ins, CNNInstr):
        _exec_cnn(state, ins, idx)
    elif isinstance(ins, FCInstr):
        if state.last_out_bank is None:
            raise SimulationError(f"instruction {idx}: FC before any CNN output")
        fm = _fetch(state, state.last_out_bank)
        if fm.n_bits != ins.feature_bits:
            raise SimulationError(f"instruction {idx}: FC expects {ins.feature_bits} feature bits, "
                                  f"map has {fm.n_bits}")
        cw = read_fc_region(state.fc_sram, ins.feature_bits, ins.classes)
        if len(state.fc_biases) < ins.classes:
            raise SimulationError(f"instruction {idx}: {ins.classes} classes but only "
                                  f"{len(state.fc_biases)} FC biases loaded")
        weights = LayerWeights(LayerKind.FC, class_words=cw,
                               class_biases=np.array(state.fc_biases[:ins.classes]),
                               n_bits=ins.feature_bits)
        state.scores, state.label = fc_layer(fm, weights, trace, idx)
        state.summaries.append(LayerSummary(idx, "FC", (fm.width, fm.height), (ins.classes,),
                                            ops=2 * ins.feature_bits * ins.classes))
    state.pc += 1
    return state


def run(program: Program, image: MemoryImage, input_image: IntegerImage, *,
        record_trace: bool = True, keep_maps: bool = False) -> RunResult:
    """Execute a whole program on one input image."""
    state = load_memory_image(image, program)
    state.input_image = input_image
    if not record_trace:
        state.trace = None
    if keep_maps:
        state.layer_maps = []
    while state.pc < len(program):
        step(state)
    return RunResult(
        label=state.label,
        scores=list(state.scores),
        trace=state.trace if state.trace is not None else [],
        summaries=state.summaries,
        output_map=state.output_map,
        layer_maps=state.layer_maps,
        program_hash=program_hash(program.words()),
    )
