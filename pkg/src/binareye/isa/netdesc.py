"""Network descriptions: the line-oriented ``.net`` format and constraint checks.

Example::

    name benchmark9
    input 32 32 3 7
    smode 1
    layer cnn pool=0
    layer cnn pool=1
    layer fc classes=10
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from binareye.isa.instructions import FC_MAX_BITS, FC_MAX_CLASSES, MAX_DIM, PROGRAM_SLOTS

WEIGHT_SRAM_BYTES = 265_216  # 259 KiB
FC_SRAM_BYTES = 5_120
BANK_BITS = 262_144  # 32 KiB
MAX_CNN_LAYERS = PROGRAM_SLOTS - 2
ARRAY_CHANNELS = 256


class NetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    type: str  # "cnn" or "fc"
    pool: bool = False
    classes: int = 0
    filters: Optional[int] = None
    s_mode: Optional[int] = None


@dataclass(frozen=True)
class NetworkDescription:
    layers: tuple
    s_mode: int = 1
    width: int = 32
    height: int = 32
    channels: int = 3
    pixel_bits: int = 7
    name: str = "net"

    @property
    def cnn_layers(self) -> list:
        return [l for l in self.layers if l.type == "cnn"]

    @property
    def fc(self) -> Optional[LayerSpec]:
        fcs = [l for l in self.layers if l.type == "fc"]
        return fcs[0] if fcs else None

    def geometry(self) -> list[tuple[int, int, int, int]]:
        """Per CNN layer ``(w_in, h_in, w_out, h_out)`` with pooling applied to the output."""
        out = []
        w, h = self.width, self.height
        for layer in self.cnn_layers:
            wo, ho = w - 1, h - 1
            if layer.pool:
                wo, ho = wo // 2, ho // 2
            out.append((w, h, wo, ho))
            w, h = wo, ho
        return out

    def final_shape(self) -> tuple[int, int]:
        g = self.geometry()
        return (g[-1][2], g[-1][3]) if g else (self.width, self.height)


def layer_weight_bytes(s_mode: int) -> int:
    """Weight-SRAM bytes for one layer: neuron words then 256 packed 12-bit thresholds."""
    return (4 // s_mode) * 64 * 128 + 256 * 12 // 8


def check_constraints(net: NetworkDescription) -> list[str]:
    """Every violated hardware constraint, as readable messages. Empty means compilable."""
    errs: list[str] = []
    if not (1 <= net.width <= MAX_DIM and 1 <= net.height <= MAX_DIM):
        errs.append(f"input {net.width}x{net.height}: W x H up to 32x32")
    if net.channels != 3 or net.pixel_bits != 7:
        errs.append(f"input must be 3-channel 7-bit RGB, got {net.channels} channels x {net.pixel_bits} bits")
    if net.s_mode not in (1, 2, 4):
        errs.append(f"S={net.s_mode}: S must be 1, 2 or 4")
        return errs
    f_expected = ARRAY_CHANNELS // net.s_mode
    cnns = net.cnn_layers
    if not 1 <= len(cnns) <= MAX_CNN_LAYERS:
        errs.append(f"{len(cnns)} CNN layers: need 1..{MAX_CNN_LAYERS} (16 program slots minus IO and FC)")
    for i, layer in enumerate(net.layers):
        if layer.type not in ("cnn", "fc"):
            errs.append(f"layer {i}: unknown type {layer.type!r}")
        if layer.s_mode is not None and layer.s_mode != net.s_mode:
            errs.append(f"layer {i}: S={layer.s_mode} differs from network S={net.s_mode} (one S per program)")
        if layer.type == "cnn" and layer.filters is not None and layer.filters != f_expected:
            errs.append(f"layer {i}: F={layer.filters}: F must be 256/S in {{64,128,256}} (256/S = {f_expected} here)")
    fcs = [i for i, l in enumerate(net.layers) if l.type == "fc"]
    if len(fcs) > 1:
        errs.append("at most one FC layer")
    if fcs and fcs[0] != len(net.layers) - 1:
        errs.append("FC layer must be last")
    w, h = net.width, net.height
    for i, layer in enumerate(cnns):
        if w < 2 or h < 2:
            errs.append(f"CNN layer {i}: input {w}x{h}; spatial dims must stay >= 2 before every CNN layer")
            break
        w, h = w - 1, h - 1
        if layer.pool:
            if w < 2 or h < 2:
                errs.append(f"CNN layer {i}: cannot pool a {w}x{h} map")
                break
            w, h = w // 2, h // 2
    if ARRAY_CHANNELS * min(net.width - 1, MAX_DIM) * min(net.height - 1, MAX_DIM) > BANK_BITS:
        errs.append("largest intermediate map does not fit a 262144-bit feature bank")
    wbytes = len(cnns) * layer_weight_bytes(net.s_mode)
    if wbytes > WEIGHT_SRAM_BYTES:
        errs.append(f"weight SRAM overflow: {wbytes} B needed, {WEIGHT_SRAM_BYTES} B available")
    fc = net.fc
    if fc is not None:
        if not 2 <= fc.classes <= FC_MAX_CLASSES:
            errs.append(f"FC classes {fc.classes}: up to 10 classes (and at least 2)")
        bits = ARRAY_CHANNELS * max(w, 0) * max(h, 0)
        if bits > FC_MAX_BITS:
            errs.append(f"FC feature length {bits} bits exceeds {FC_MAX_BITS}")
        elif fc.classes * bits // 8 > FC_SRAM_BYTES:
            errs.append(f"FC SRAM overflow: {fc.classes * bits // 8} B > {FC_SRAM_BYTES} B")
    return errs


def parse_net(text: str) -> NetworkDescription:
    name = "net"
    dims = (32, 32, 3, 7)
    s_mode = None
    layers = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        key = key.lower()
        try:
            if key == "name":
                name = " ".join(rest)
            elif key == "input":
                if len(rest) != 4:
                    raise NetFormatError("input takes W H C BITS")
                dims = tuple(int(v) for v in rest)
            elif key == "smode":
                (s_mode,) = (int(v) for v in rest)
            elif key == "layer":
                if not rest:
                    raise NetFormatError("layer needs a type")
                ltype = rest[0].lower()
                kv = {}
                for tok in rest[1:]:
                    k, sep, v = tok.partition("=")
                    if not sep:
                        raise NetFormatError(f"expected key=value, got {tok!r}")
                    kv[k.lower()] = int(v)
                unknown = set(kv) - {"pool", "classes", "filters", "smode"}
                if unknown:
                    raise NetFormatError(f"unknown layer option(s) {sorted(unknown)}")
                layers.append(LayerSpec(ltype, bool(kv.get("pool", 0)), kv.get("classes", 0),
                                        kv.get("filters"), kv.get("smode")))
            else:
                raise NetFormatError(f"unknown key {key!r}")
        except NetFormatError as exc:
            raise NetFormatError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise NetFormatError(f"line {lineno}: {exc}") from None
    if s_mode is None:
        raise NetFormatError("missing 'smode' line")
    w, h, c, b = dims
    return NetworkDescription(tuple(layers), s_mode, w, h, c, b, name)


def format_net(net: NetworkDescription) -> str:
    lines = [f"name {net.name}", f"input {net.width} {net.height} {net.channels} {net.pixel_bits}",
             f"smode {net.s_mode}"]
    for layer in net.layers:
        if layer.type == "fc":
            lines.append(f"layer fc classes={layer.classes}")
        else:
            extra = f" filters={layer.filters}" if layer.filters is not None else ""
            lines.append(f"layer cnn pool={int(layer.pool)}{extra}")
    return "\n".join(lines) + "\n"


def benchmark9(s_mode: int = 1) -> NetworkDescription:
    """Reference 9-layer net (8 CNN + FC) reconstructed from the chip's op and memory totals.

    32 -> 31, 30, 29, 28 (pool 14), 13, 12 (pool 6), 5, 4 -> FC on 256x4x4 = 4096 bits.
    """
    pools = (0, 0, 0, 1, 0, 1, 0, 0)
    layers = tuple(LayerSpec("cnn", bool(p)) for p in pools) + (LayerSpec("fc", classes=10),)
    return NetworkDescription(layers, s_mode, name="benchmark9")
