"""Text assembler and disassembler.

Grammar, one instruction per line, ``#`` starts a comment, keywords are
case-insensitive::

    IO (IN|OUT_LABEL|OUT_MAP) [WEST|EAST]
    CNN S=<1|2|4> W=<n> H=<n> POOL=<0|1> FIRST=<0|1> WB=<addr> IN=<bank> OUT=<bank>
    FC N=<bits> CLASSES=<n>
"""

from __future__ import annotations

import re

from binareye.isa.instructions import (
    Bank,
    CNNInstr,
    FCInstr,
    IODir,
    IOInstr,
    ISAError,
    Program,
    ProgramError,
)

_TOKEN = re.compile(r"\S+")
_CNN_KEYS = ("S", "W", "H", "POOL", "FIRST", "WB", "IN", "OUT")
_FC_KEYS = ("N", "CLASSES")


class AsmError(ISAError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col, self.msg = line, col, msg
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{msg}")


def _int(text: str, line: int, col: int) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise AsmError(f"expected an integer, got {text!r}", line, col) from None


def _bank(text: str, line: int, col: int) -> Bank:
    try:
        return Bank[text.upper()]
    except KeyError:
        raise AsmError(f"unknown bank {text!r} (WEST or EAST)", line, col) from None


def _fields(tokens, keys, line):
    out = {}
    for col, tok in tokens:
        key, sep, val = tok.partition("=")
        key = key.upper()
        if not sep or not val:
            raise AsmError(f"expected KEY=VALUE, got {tok!r}", line, col)
        if key not in keys:
            raise AsmError(f"unknown field {key}", line, col)
        if key in out:
            raise AsmError(f"duplicate field {key}", line, col)
        out[key] = (val, col + len(key) + 1)
    missing = [k for k in keys if k not in out]
    if missing:
        raise AsmError(f"missing field(s) {', '.join(missing)}", line, tokens[0][0] if tokens else 1)
    return out


def _flag(val: str, line: int, col: int) -> bool:
    v = _int(val, line, col)
    if v not in (0, 1):
        raise AsmError(f"flag must be 0 or 1, got {v}", line, col)
    return bool(v)


def parse_line(text: str, line: int = 0):
    """Parse one source line; returns an instruction or ``None`` for blank/comment lines."""
    code = text.split("#", 1)[0]
    tokens = [(m.start() + 1, m.group()) for m in _TOKEN.finditer(code)]
    if not tokens:
        return None
    col0, op = tokens[0]
    op = op.upper()
    args = tokens[1:]
    try:
        if op == "IO":
            if not 1 <= len(args) <= 2:
                raise AsmError("IO takes a direction and an optional bank", line, col0)
            dcol, dname = args[0]
            try:
                direction = IODir[dname.upper()]
            except KeyError:
                raise AsmError(f"unknown IO direction {dname!r}", line, dcol) from None
            bank = _bank(args[1][1], line, args[1][0]) if len(args) == 2 else Bank.WEST
            return IOInstr(direction, bank)
        if op == "CNN":
            f = _fields(args, _CNN_KEYS, line)
            num = lambda k: _int(f[k][0], line, f[k][1])  # noqa: E731
            flag = lambda k: _flag(f[k][0], line, f[k][1])  # noqa: E731
            bank_of = lambda k: _bank(f[k][0], line, f[k][1])  # noqa: E731
            return CNNInstr(
                s_mode=num("S"),
                width=num("W"),
                height=num("H"),
                pool=flag("POOL"),
                first_layer=flag("FIRST"),
                weight_base=num("WB"),
                in_bank=bank_of("IN"),
                out_bank=bank_of("OUT"),
            )
        if op == "FC":
            f = _fields(args, _FC_KEYS, line)
            return FCInstr(_int(f["N"][0], line, f["N"][1]), _int(f["CLASSES"][0], line, f["CLASSES"][1]))
    except AsmError:
        raise
    except ISAError as exc:
        raise AsmError(f"field out of range: {exc}", line, col0) from None
    raise AsmError(f"unknown mnemonic {tokens[0][1]!r}", line, col0)


def assemble(text: str) -> Program:
    instrs = []
    first_line = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        ins = parse_line(raw, lineno)
        if ins is not None:
            first_line[len(instrs)] = lineno
            instrs.append(ins)
    try:
        return Program(tuple(instrs))
    except ProgramError as exc:
        line = first_line.get(exc.index, 0)
        raise AsmError(str(exc), line, 1 if line else 0) from None


def format_instruction(ins) -> str:
    if isinstance(ins, IOInstr):
        if ins.direction is IODir.OUT_LABEL and ins.bank is Bank.WEST:
            return "IO OUT_LABEL"
        return f"IO {ins.direction.name} {ins.bank.name}"
    if isinstance(ins, CNNInstr):
        return (
            f"CNN S={ins.s_mode} W={ins.width} H={ins.height} POOL={int(ins.pool)} "
            f"FIRST={int(ins.first_layer)} WB={ins.weight_base} "
            f"IN={ins.in_bank.name} OUT={ins.out_bank.name}"
        )
    if isinstance(ins, FCInstr):
        return f"FC N={ins.feature_bits} CLASSES={ins.classes}"
    raise TypeError(f"not an instruction: {ins!r}")


def disassemble(program: Program) -> str:
    return "".join(format_instruction(i) + "\n" for i in program)
