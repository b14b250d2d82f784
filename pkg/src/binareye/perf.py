"""Analytical cycle and energy model over simulator traces.

Energy is two-term: ``e_op`` per binary op plus ``e_ld`` per weight bit
loaded into the neuron flip-flops. Both coefficients are fitted from the
measured per-inference energies at S=1 and S=4; the S=2 energy is then a
prediction.

Op accounting is nominal full-width: a CNN layer costs
``2 * (256/S)**2 * 4 * Wout * Hout`` ops (first layer included), an FC layer
``2 * feature_bits * classes``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from binareye.trace import EventKind, TraceEvent

FREQ_RANGE = (1.5e6, 48e6)
MEASURED_UJ = {1: 14.4, 2: 3.47, 4: 0.92}
CALIBRATION_S = (1, 4)
FC_IO_BITS_PER_CYCLE = 64
QQVGA = (160, 120)
WINDOW = 32
WINDOW_STRIDE = 16


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class PerfParams:
    e_op: float
    e_ld: float
    ld_width: int = 64
    freq: float = 6e6
    overlap_ld: bool = False
    vdd_array: float = 0.66  # metadata only
    vdd_mem: float = 0.9  # metadata only

    def __post_init__(self):
        if self.e_op <= 0 or self.e_ld < 0 or self.ld_width <= 0 or self.freq <= 0:
            raise ValueError("energy coefficients, LD width and frequency must be positive")
        if not FREQ_RANGE[0] <= self.freq <= FREQ_RANGE[1]:
            warnings.warn(f"frequency {self.freq:g} Hz outside the measured 1.5-48 MHz range",
                          stacklevel=2)


def count_ops(w_out: int, h_out: int, s_mode: int) -> int:
    """Nominal ops of one CNN layer with a ``w_out x h_out`` conv output (pre-pool)."""
    f = 256 // s_mode
    return 2 * f * f * 4 * w_out * h_out


def count_fc_ops(feature_bits: int, classes: int) -> int:
    return 2 * feature_bits * classes


def net_totals(net) -> tuple[int, int]:
    """``(ops, ld_bits)`` of a NetworkDescription from geometry alone."""
    ops = 0
    ld_bits = 0
    for w_in, h_in, _, _ in net.geometry():
        ops += count_ops(w_in - 1, h_in - 1, net.s_mode)
        ld_bits += (4 // net.s_mode) * 64 * 1024
    fc = net.fc
    if fc is not None:
        fw, fh = net.final_shape()
        ops += count_fc_ops(256 * fw * fh, fc.classes)
    return ops, ld_bits


@dataclass
class LayerPerf:
    layer: int
    kind: str
    ops: int = 0
    ld_bits: int = 0
    ld_cycles: int = 0
    conv_cycles: int = 0
    cycles: int = 0
    joules: float = 0.0
    op_joules: float = 0.0


def _layer_table(trace: Iterable[TraceEvent]) -> dict[int, dict]:
    layers: dict[int, dict] = {}
    for e in trace:
        d = layers.setdefault(e.layer, {"kind": None, "phases": {}, "ops": 0, "ld_bits": 0,
                                        "other_bits": 0})
        if e.kind is EventKind.LD:
            d["kind"] = "CNN"
            d["phases"].setdefault(e.phase, [0, 0])[0] += e.bits
            d["ld_bits"] += e.bits
        elif e.kind is EventKind.CONV_STEP:
            d["phases"].setdefault(e.phase, [0, 0])[1] += 1
            d["ops"] += e.ops
        elif e.kind is EventKind.FC_EVAL:
            d["kind"] = "FC"
            d["ops"] += e.ops
            d["other_bits"] += e.bits
        elif e.kind is EventKind.IO:
            d["kind"] = d["kind"] or "IO"
            d["other_bits"] += e.bits
    for idx, d in layers.items():
        if d["kind"] is None:
            raise ValueError(f"trace incomplete: layer {idx} has no LD, FC_EVAL or IO event")
    return layers


def count_cycles(trace: Sequence[TraceEvent], params: PerfParams) -> dict[int, LayerPerf]:
    """Per-layer cycle counts (energy fields left at zero)."""
    out = {}
    for idx, d in sorted(_layer_table(trace).items()):
        lp = LayerPerf(idx, d["kind"], ops=d["ops"], ld_bits=d["ld_bits"])
        if d["kind"] == "CNN":
            for ld_bits, steps in d["phases"].values():
                ld = math.ceil(ld_bits / params.ld_width)
                lp.ld_cycles += ld
                lp.conv_cycles += steps
                lp.cycles += max(ld, steps) if params.overlap_ld else ld + steps
        else:
            lp.cycles = math.ceil(d["other_bits"] / FC_IO_BITS_PER_CYCLE)
        out[idx] = lp
    return out


def energy(trace: Sequence[TraceEvent], params: PerfParams) -> dict[int, LayerPerf]:
    """Per-layer cycles plus joules ``e_op * ops + e_ld * ld_bits``."""
    layers = count_cycles(trace, params)
    for lp in layers.values():
        lp.op_joules = params.e_op * lp.ops
        lp.joules = lp.op_joules + params.e_ld * lp.ld_bits
    return layers


def calibrate(points: Sequence[tuple[int, int, float]], **kwargs) -> PerfParams:
    """Fit ``(e_op, e_ld)`` from ``(ops, ld_bits, joules)`` points.

    Two points are solved exactly; more are fitted by least squares.
    """
    if len(points) < 2:
        raise CalibrationError("need at least two reference points")
    a = np.array([[p[0], p[1]] for p in points], dtype=float)
    b = np.array([p[2] for p in points], dtype=float)
    scale = np.abs(a).max(axis=0)
    scale[scale == 0] = 1.0
    an = a / scale
    if np.linalg.matrix_rank(an, tol=1e-9) < 2:
        raise CalibrationError("singular system: reference points are proportional")
    if len(points) == 2:
        coef = np.linalg.solve(an, b)
    else:
        coef = np.linalg.lstsq(an, b, rcond=None)[0]
    e_op, e_ld = coef / scale
    # LD share below rounding noise of the fit is a planted zero
    if abs(coef[1]) <= 1e-9 * np.abs(b).max():
        e_ld = 0.0
    if e_op <= 0 or e_ld < 0:
        raise CalibrationError(f"fit gave non-physical coefficients e_op={e_op:g}, e_ld={e_ld:g}")
    return PerfParams(float(e_op), float(e_ld), **kwargs)


def reference_points(net_for_s) -> list[tuple[int, int, float]]:
    """Calibration points ``(ops, ld_bits, J)`` at S=1 and S=4 for the given net factory."""
    pts = []
    for s in CALIBRATION_S:
        ops, ld = net_totals(net_for_s(s))
        pts.append((ops, ld, MEASURED_UJ[s] * 1e-6))
    return pts


@lru_cache(maxsize=None)
def _default_coeffs() -> tuple[float, float]:
    from binareye.isa.netdesc import benchmark9

    p = calibrate(reference_points(benchmark9))
    return p.e_op, p.e_ld


def default_params(**kwargs) -> PerfParams:
    """Coefficients fitted to the measured S=1 / S=4 benchmark energies."""
    e_op, e_ld = _default_coeffs()
    return PerfParams(e_op, e_ld, **kwargs)


def sliding_windows(width: int, height: int, window: int = WINDOW, stride: int = WINDOW_STRIDE) -> int:
    if width < window or height < window:
        return 0
    return ((width - window) // stride + 1) * ((height - window) // stride + 1)


@dataclass
class PerfReport:
    params: PerfParams
    layers: list
    ops: int
    cycles: int
    seconds: float
    joules: float
    op_joules: float
    gops: float
    core_tops_w: float
    i2l_tops_w: float
    inf_per_s: float
    uj_per_inf: float
    edp_js: float
    power_w: float
    frame: tuple = QQVGA
    windows: int = 0
    budget_w: float = 1e-3
    fps_at_budget: float = 0.0
    battery_mwh: float = 810.0
    battery_days: float = 0.0
    notes: list = field(default_factory=list)


def report(trace: Sequence[TraceEvent], params: Optional[PerfParams] = None, *,
           power_budget: float = 1e-3, battery_mwh: float = 810.0,
           frame: tuple = QQVGA) -> PerfReport:
    if power_budget <= 0:
        raise ValueError("power budget must be positive")
    params = params or default_params()
    layers = list(energy(trace, params).values())
    ops = sum(l.ops for l in layers)
    cycles = sum(l.cycles for l in layers)
    joules = sum(l.joules for l in layers)
    op_joules = sum(l.op_joules for l in layers)
    seconds = cycles / params.freq
    windows = sliding_windows(*frame)
    fps = power_budget / joules / windows if windows else 0.0
    return PerfReport(
        params=params,
        layers=layers,
        ops=ops,
        cycles=cycles,
        seconds=seconds,
        joules=joules,
        op_joules=op_joules,
        gops=ops / seconds / 1e9,
        core_tops_w=ops / op_joules / 1e12,
        i2l_tops_w=ops / joules / 1e12,
        inf_per_s=params.freq / cycles,
        uj_per_inf=joules * 1e6,
        edp_js=joules * seconds,
        power_w=joules / seconds,
        frame=tuple(frame),
        windows=windows,
        budget_w=power_budget,
        fps_at_budget=fps,
        battery_mwh=battery_mwh,
        battery_days=battery_mwh / (power_budget * 1e3) / 24,
        notes=["FC and IO cycles use a 64 bit/cycle convention (<2% of totals)"],
    )


def layer_gops(lp: LayerPerf, params: PerfParams) -> float:
    return lp.ops / (lp.cycles / params.freq) / 1e9 if lp.cycles else 0.0


def format_kv(rep: PerfReport) -> str:
    p = rep.params
    lines = [f"params e_op={p.e_op:.6g} e_ld={p.e_ld:.6g} ld_width={p.ld_width} "
             f"freq={p.freq:.6g} overlap_ld={int(p.overlap_ld)}"]
    for l in rep.layers:
        lines.append(f"layer={l.layer} kind={l.kind} ops={l.ops} cycles={l.cycles} "
                     f"ld_cycles={l.ld_cycles} conv_cycles={l.conv_cycles} "
                     f"gops={layer_gops(l, p):.1f} uj={l.joules * 1e6:.4f}")
    lines.append(f"total ops={rep.ops} cycles={rep.cycles} seconds={rep.seconds:.6g} "
                 f"uj_per_inf={rep.uj_per_inf:.4f} inf_per_s={rep.inf_per_s:.2f} gops={rep.gops:.1f} "
                 f"core_tops_w={rep.core_tops_w:.2f} i2l_tops_w={rep.i2l_tops_w:.2f} "
                 f"edp_js={rep.edp_js:.4g} power_mw={rep.power_w * 1e3:.4f}")
    lines.append(f"app frame={rep.frame[0]}x{rep.frame[1]} windows={rep.windows} "
                 f"budget_mw={rep.budget_w * 1e3:g} fps={rep.fps_at_budget:.2f} "
                 f"battery_mwh={rep.battery_mwh:g} battery_days={rep.battery_days:.2f}")
    return "\n".join(lines) + "\n"


def format_table(rep: PerfReport) -> str:
    p = rep.params
    out = [f"PerfParams: e_op={p.e_op * 1e15:.3f} fJ/op  e_ld={p.e_ld * 1e15:.3f} fJ/bit  "
           f"LD {p.ld_width} b/cycle  f={p.freq / 1e6:g} MHz  "
           f"{'overlapped' if p.overlap_ld else 'serialized'} LD",
           f"{'layer':>5} {'kind':<4} {'ops':>14} {'cycles':>8} {'GOPS':>8} {'uJ':>9}"]
    for l in rep.layers:
        out.append(f"{l.layer:>5} {l.kind:<4} {l.ops:>14,} {l.cycles:>8,} "
                   f"{layer_gops(l, p):>8.1f} {l.joules * 1e6:>9.4f}")
    out.append(f"{'total':>5} {'':<4} {rep.ops:>14,} {rep.cycles:>8,} {rep.gops:>8.1f} "
               f"{rep.uj_per_inf:>9.4f}")
    out.append(f"inferences/s {rep.inf_per_s:.1f}   core {rep.core_tops_w:.1f} TOPS/W   "
               f"I2L {rep.i2l_tops_w:.1f} TOPS/W   EDP {rep.edp_js:.3g} J*s   "
               f"P {rep.power_w * 1e3:.3f} mW")
    out.append(f"sliding window {rep.frame[0]}x{rep.frame[1]}: {rep.windows} windows, "
               f"{rep.fps_at_budget:.1f} fps at {rep.budget_w * 1e3:g} mW, "
               f"{rep.battery_days:.2f} days on {rep.battery_mwh:g} mWh")
    out.extend(f"note: {n}" for n in rep.notes)
    return "\n".join(out) + "\n"


def params_dict(p: PerfParams) -> dict:
    return asdict(p)
