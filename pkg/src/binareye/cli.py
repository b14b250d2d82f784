"""``binareye`` command line: asm, disasm, compile, sim, report, verify, bench."""

from __future__ import annotations

import argparse
import logging
import struct
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from binareye import perf
from binareye.bitcore import IntegerImage
from binareye.isa import assemble, compile_network, disassemble, parse_net
from binareye.isa.container import read_container, write_container
from binareye.isa.instructions import Program
from binareye.isa.netdesc import NetworkDescription
from binareye.oracle.generate import random_params
from binareye.oracle.model import load_dense
from binareye.simulator import run
from binareye.trace import read_trace, write_trace

log = logging.getLogger("binareye")

RAW_IMAGE_BYTES = 32 * 32 * 3
BUILTIN_NETS = ("benchmark9",)


class CLIError(Exception):
    pass


def load_image(path) -> IntegerImage:
    """Raw 3072-byte interleaved RGB (32x32, row-major) or binary PPM (P6)."""
    data = Path(path).read_bytes()
    if data[:2] == b"P6":
        return _load_ppm(data, path)
    if len(data) != RAW_IMAGE_BYTES:
        raise CLIError(f"{path}: raw image must be {RAW_IMAGE_BYTES} bytes (32x32 RGB), got {len(data)}")
    px = np.frombuffer(data, np.uint8).reshape(32, 32, 3)
    if px.max() > 127:
        raise CLIError(f"{path}: raw pixel value {int(px.max())} exceeds 7-bit range")
    return IntegerImage(px.transpose(2, 1, 0).astype(np.int32))


def _load_ppm(data: bytes, path) -> IntegerImage:
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CLIError(f"{path}: truncated PPM header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte before the raster
    width, height, maxval = fields
    if not (1 <= width <= 32 and 1 <= height <= 32):
        raise CLIError(f"{path}: PPM is {width}x{height}; the input layer takes up to 32x32")
    if maxval > 255:
        raise CLIError(f"{path}: 16-bit PPM not supported")
    raster = data[pos:pos + width * height * 3]
    if len(raster) != width * height * 3:
        raise CLIError(f"{path}: PPM raster truncated")
    px = np.frombuffer(raster, np.uint8).reshape(height, width, 3).astype(np.int32)
    if maxval > 127:
        log.warning("%s: maxval %d > 127, shifting pixels right by one bit", path, maxval)
        px = px >> 1
    return IntegerImage(px.transpose(2, 1, 0))


def load_net(spec: str, s_mode: int | None = None) -> NetworkDescription:
    if spec in BUILTIN_NETS:
        text = resources.files("binareye").joinpath("data", f"{spec}.net").read_text()
    else:
        text = Path(spec).read_text()
    net = parse_net(text)
    if s_mode is not None:
        net = NetworkDescription(net.layers, s_mode, net.width, net.height, net.channels,
                                 net.pixel_bits, net.name)
    return net


def read_program(path) -> Program:
    data = Path(path).read_bytes()
    if Path(path).suffix in (".asm", ".s", ".txt"):
        return assemble(data.decode())
    if len(data) % 4:
        raise CLIError(f"{path}: program binary length {len(data)} is not a multiple of 4")
    return Program.from_words(struct.unpack(f"<{len(data) // 4}I", data))


def write_program(path, program: Program) -> None:
    Path(path).write_bytes(struct.pack(f"<{len(program)}I", *program.words()))


def _params(args) -> perf.PerfParams:
    return perf.default_params(freq=args.freq, ld_width=args.ld_width, overlap_ld=args.overlap_ld)


def _frame(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return int(w), int(h)


def _simulate_net(net: NetworkDescription, seed: int):
    dense = random_params(net, np.random.default_rng(seed))
    program, image = compile_network(net, dense)
    return run(program, image, IntegerImage.zeros(net.width, net.height))


def cmd_asm(args):
    program = assemble(Path(args.source).read_text())
    write_program(args.output, program)
    print(f"{len(program)} instructions -> {args.output}")


def cmd_disasm(args):
    text = disassemble(read_program(args.program))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_compile(args):
    net = load_net(args.net, args.smode)
    if args.params:
        dense = load_dense(args.params)
    else:
        dense = random_params(net, np.random.default_rng(args.seed))
    program, image = compile_network(net, dense)
    out = Path(args.output)
    write_program(out.with_suffix(".bin"), program)
    out.with_suffix(".asm").write_text(disassemble(program))
    write_container(out.with_suffix(".bnry"), image)
    print(f"program: {len(program)} instructions -> {out.with_suffix('.bin')}")
    print(f"weights: {len(image.weight_sram)} B weight SRAM, {len(image.fc_sram)} B FC SRAM "
          f"-> {out.with_suffix('.bnry')}")


def cmd_sim(args):
    program = read_program(args.program)
    image = read_container(args.weights)
    if args.image:
        img = load_image(args.image)
    else:
        first = next(i for i in program if hasattr(i, "first_layer"))
        img = IntegerImage.zeros(first.width, first.height)
    result = run(program, image, img)
    print(f"label={result.label}")
    print("scores=" + ",".join(str(s) for s in result.scores))
    if args.trace:
        with open(args.trace, "w") as fh:
            write_trace(result.trace, fh, result.program_hash)
        print(f"trace: {len(result.trace)} events -> {args.trace}")


def _emit(rep: perf.PerfReport, fmt: str):
    sys.stdout.write(perf.format_kv(rep) if fmt == "kv" else perf.format_table(rep))


def cmd_report(args):
    if bool(args.trace) == bool(args.net):
        raise CLIError("report needs exactly one of --trace or --net")
    if args.trace:
        with open(args.trace) as fh:
            events, _ = read_trace(fh)
    else:
        events = _simulate_net(load_net(args.net, args.smode), args.seed).trace
    rep = perf.report(events, _params(args), power_budget=args.budget_mw * 1e-3,
                      battery_mwh=args.battery_mwh, frame=_frame(args.frame))
    _emit(rep, args.format)


def cmd_verify(args):
    from binareye.verify import sweep

    results = sweep(range(args.start, args.start + args.seeds), args.inputs, args.jobs)
    good = sum(r.ok for r in results)
    for r in results:
        if not r.ok or args.verbose:
            status = "ok" if r.ok else f"MISMATCH ({r.first_mismatch})"
            print(f"seed {r.seed}: depth={r.depth} S={r.s_mode} {status}")
    print(f"{good}/{len(results)} equivalent")
    return 0 if good == len(results) else 1


def cmd_bench(args):
    params = _params(args)
    rows = []
    for s in (1, 2, 4):
        trace = _simulate_net(load_net(args.net, s), args.seed).trace
        rows.append((s, perf.report(trace, params, power_budget=args.budget_mw * 1e-3,
                                    battery_mwh=args.battery_mwh, frame=_frame(args.frame))))
    if args.format == "kv":
        for s, rep in rows:
            sys.stdout.write(f"# S={s}\n" + perf.format_kv(rep))
        return
    p = params
    print(f"net {args.net}, weights seed {args.seed}")
    print(f"PerfParams e_op={p.e_op:.6g} J/op e_ld={p.e_ld:.6g} J/bit ld_width={p.ld_width} "
          f"freq={p.freq:g} Hz overlap_ld={int(p.overlap_ld)}")
    print(f"{'S':>2} {'ops':>15} {'cycles':>8} {'inf/s':>8} {'GOPS':>7} {'uJ/inf':>8} "
          f"{'meas uJ':>8} {'core T/W':>9} {'I2L T/W':>8} {'fps@budget':>10}")
    for s, rep in rows:
        print(f"{s:>2} {rep.ops:>15,} {rep.cycles:>8,} {rep.inf_per_s:>8.1f} {rep.gops:>7.1f} "
              f"{rep.uj_per_inf:>8.2f} {perf.MEASURED_UJ[s]:>8.2f} {rep.core_tops_w:>9.1f} "
              f"{rep.i2l_tops_w:>8.1f} {rep.fps_at_budget:>10.1f}")
    l1 = rows[0][1].layers[1]
    print(f"layer 1 at S=1: {l1.ops:,} ops, {l1.cycles:,} cycles, {perf.layer_gops(l1, p):.1f} GOPS")
    print(f"battery: {rows[0][1].battery_days:.2f} days on {args.battery_mwh:g} mWh at {args.budget_mw:g} mW")


def _perf_flags(p):
    p.add_argument("--freq", type=float, default=6e6, help="clock frequency in Hz (default 6e6)")
    p.add_argument("--ld-width", type=int, default=64, help="weight-load bits per cycle (default 64)")
    p.add_argument("--overlap-ld", action="store_true", help="hide LD behind CONV instead of serializing")
    p.add_argument("--budget-mw", type=float, default=1.0, help="power budget for the fps estimate (mW)")
    p.add_argument("--battery-mwh", type=float, default=810.0, help="battery capacity (mWh)")
    p.add_argument("--frame", default="160x120", help="sliding-window frame size WxH (default QQVGA)")
    p.add_argument("--format", choices=("table", "kv"), default="table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="binareye", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("asm", help="assemble text to a program binary")
    p.add_argument("source")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("disasm", help="disassemble a program binary")
    p.add_argument("program")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_disasm)

    p = sub.add_parser("compile", help="compile a network + parameters to program and weight container")
    p.add_argument("net", help="network description file or a builtin name (benchmark9)")
    p.add_argument("-o", "--output", required=True, help="output prefix (.bin, .asm, .bnry are written)")
    p.add_argument("--params", help="dense parameter set (.npz); random seeded weights if omitted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-s", "--smode", type=int, choices=(1, 2, 4), help="override the network S-mode")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("sim", help="run a program on an input image")
    p.add_argument("program", help="program binary (.bin) or assembly (.asm)")
    p.add_argument("weights", help="BNRY weight container")
    p.add_argument("image", nargs="?", help="raw 3072-byte RGB or P6 PPM; zero image if omitted")
    p.add_argument("--trace", help="write the event trace here")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("report", help="performance report from a trace or a network")
    p.add_argument("--trace")
    p.add_argument("--net")
    p.add_argument("-s", "--smode", type=int, choices=(1, 2, 4))
    p.add_argument("--seed", type=int, default=0)
    _perf_flags(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("verify", help="simulator vs oracle sweep over random networks")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--inputs", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="ops, cycles and energy at S=1/2/4")
    p.add_argument("--net", default="benchmark9")
    p.add_argument("--seed", type=int, default=0)
    _perf_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        rc = args.func(args)
    except (CLIError, ValueError, RuntimeError, OSError, StopIteration) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
