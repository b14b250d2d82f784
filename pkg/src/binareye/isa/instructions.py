"""Instruction records, the 32-bit encoding, and program-level rules.

Word layout (bit 31 first)::

    31:30 opcode   00 IO, 01 CNN, 10 FC, 11 reserved
    29:28 subop    IO: direction (IN, OUT_LABEL, OUT_MAP); CNN: S as 0/1/2 for 1/2/4
    27:22 W        CNN: input width; FC: feature_bits/64 - 1
    21:16 H        CNN: input height; FC: class count
    15    pool     CNN only
    14    first    CNN only
    13    in bank  CNN input bank; IO bank (0 WEST, 1 EAST)
    12    out bank CNN only
    11:0  weight base, in 128-byte weight-SRAM rows (CNN only)

Fields an opcode does not use must be zero; decode rejects anything else.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Union

PROGRAM_SLOTS = 16
WB_ROW_BYTES = 128
WB_MAX = (1 << 12) - 1
MAX_DIM = 32
FC_MAX_BITS = 4096
FC_MAX_CLASSES = 10


class ISAError(ValueError):
    pass


class ProgramError(ISAError):
    """Program-level rule violation; ``index`` is the offending instruction."""

    def __init__(self, msg: str, index: int = 0):
        super().__init__(msg)
        self.index = index


class Bank(IntEnum):
    WEST = 0
    EAST = 1

    def other(self) -> "Bank":
        return Bank(1 - self)


class IODir(IntEnum):
    IN = 0
    OUT_LABEL = 1
    OUT_MAP = 2


class Opcode(IntEnum):
    IO = 0
    CNN = 1
    FC = 2


_S_CODE = {1: 0, 2: 1, 4: 2}
_S_FROM_CODE = {v: k for k, v in _S_CODE.items()}


@dataclass(frozen=True)
class IOInstr:
    direction: IODir
    bank: Bank = Bank.WEST

    def __post_init__(self):
        object.__setattr__(self, "direction", IODir(self.direction))
        object.__setattr__(self, "bank", Bank(self.bank))


@dataclass(frozen=True)
class CNNInstr:
    s_mode: int
    width: int
    height: int
    pool: bool = False
    first_layer: bool = False
    weight_base: int = 0
    in_bank: Bank = Bank.WEST
    out_bank: Bank = Bank.EAST

    def __post_init__(self):
        if self.s_mode not in _S_CODE:
            raise ISAError(f"S={self.s_mode} not in (1, 2, 4)")
        for name in ("width", "height"):
            v = getattr(self, name)
            if not 2 <= v <= MAX_DIM:
                raise ISAError(f"{name} {v} out of range 2..{MAX_DIM} (W x H up to 32x32)")
        if not 0 <= self.weight_base <= WB_MAX:
            raise ISAError(f"weight base {self.weight_base} out of range 0..{WB_MAX}")
        object.__setattr__(self, "pool", bool(self.pool))
        object.__setattr__(self, "first_layer", bool(self.first_layer))
        object.__setattr__(self, "in_bank", Bank(self.in_bank))
        object.__setattr__(self, "out_bank", Bank(self.out_bank))
        if self.in_bank == self.out_bank:
            raise ISAError("bank conflict: CNN input and output bank must differ")


@dataclass(frozen=True)
class FCInstr:
    feature_bits: int
    classes: int

    def __post_init__(self):
        if not 64 <= self.feature_bits <= FC_MAX_BITS or self.feature_bits % 64:
            raise ISAError(f"FC feature bits {self.feature_bits} must be a multiple of 64 in 64..4096")
        if not 2 <= self.classes <= FC_MAX_CLASSES:
            raise ISAError(f"FC classes {self.classes} out of range 2..10")


Instruction = Union[IOInstr, CNNInstr, FCInstr]


def encode_instruction(instr: Instruction) -> int:
    if isinstance(instr, IOInstr):
        return (Opcode.IO << 30) | (instr.direction << 28) | (instr.bank << 13)
    if isinstance(instr, CNNInstr):
        return (
            (Opcode.CNN << 30)
            | (_S_CODE[instr.s_mode] << 28)
            | (instr.width << 22)
            | (instr.height << 16)
            | (int(instr.pool) << 15)
            | (int(instr.first_layer) << 14)
            | (instr.in_bank << 13)
            | (instr.out_bank << 12)
            | instr.weight_base
        )
    if isinstance(instr, FCInstr):
        return (Opcode.FC << 30) | ((instr.feature_bits // 64 - 1) << 22) | (instr.classes << 16)
    raise TypeError(f"not an instruction: {instr!r}")


def decode_instruction(word: int) -> Instruction:
    if not 0 <= word < 1 << 32:
        raise ISAError(f"instruction word {word:#x} does not fit in 32 bits")
    opcode = word >> 30
    subop = (word >> 28) & 0b11
    w = (word >> 22) & 0x3F
    h = (word >> 16) & 0x3F
    low = word & 0xFFFF
    if opcode == 0b11:
        raise ISAError("reserved opcode")
    if opcode == Opcode.IO:
        if subop == 0b11:
            raise ISAError("reserved IO direction")
        if w or h or low & ~(1 << 13):
            raise ISAError(f"IO word {word:#010x} has non-zero unused fields")
        return IOInstr(IODir(subop), Bank((word >> 13) & 1))
    if opcode == Opcode.CNN:
        if subop not in _S_FROM_CODE:
            raise ISAError("reserved S-mode code")
        return CNNInstr(
            s_mode=_S_FROM_CODE[subop],
            width=w,
            height=h,
            pool=bool(word >> 15 & 1),
            first_layer=bool(word >> 14 & 1),
            in_bank=Bank(word >> 13 & 1),
            out_bank=Bank(word >> 12 & 1),
            weight_base=word & 0xFFF,
        )
    if subop or low:
        raise ISAError(f"FC word {word:#010x} has non-zero unused fields")
    return FCInstr((w + 1) * 64, h)


@dataclass(frozen=True)
class Program:
    instructions: tuple

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        validate_program(self.instructions)

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __getitem__(self, i):
        return self.instructions[i]

    def words(self) -> list[int]:
        return [encode_instruction(i) for i in self.instructions]

    @classmethod
    def from_words(cls, words: Iterable[int]) -> "Program":
        return cls(tuple(decode_instruction(w) for w in words))


def validate_program(instrs: tuple) -> None:
    """Raise ProgramError with the first violated program rule."""
    n = len(instrs)
    if n == 0:
        raise ProgramError("empty program", 0)
    if n > PROGRAM_SLOTS:
        raise ProgramError(f"program memory overflow: {n} instructions, at most {PROGRAM_SLOTS}", PROGRAM_SLOTS)
    first = instrs[0]
    if not (isinstance(first, IOInstr) and first.direction is IODir.IN):
        raise ProgramError("program must start with IO IN", 0)
    seen_cnn = False
    fc_at = None
    for idx, ins in enumerate(instrs):
        if isinstance(ins, IOInstr):
            if ins.direction is IODir.IN and idx != 0:
                raise ProgramError(f"instruction {idx}: IO IN only allowed as the first instruction", idx)
            if ins.direction is not IODir.IN and idx != n - 1:
                raise ProgramError(f"instruction {idx}: IO OUT must be the last instruction", idx)
        elif isinstance(ins, CNNInstr):
            if fc_at is not None:
                raise ProgramError(f"instruction {idx}: CNN after FC", idx)
            if ins.first_layer == seen_cnn:
                want = "only the first CNN layer may" if seen_cnn else "the first CNN layer must"
                raise ProgramError(f"instruction {idx}: {want} set FIRST=1", idx)
            seen_cnn = True
        elif isinstance(ins, FCInstr):
            if fc_at is not None:
                raise ProgramError(f"instruction {idx}: at most one FC instruction", idx)
            if not seen_cnn:
                raise ProgramError(f"instruction {idx}: FC before any CNN layer", idx)
            fc_at = idx
        else:
            raise ProgramError(f"instruction {idx}: unknown instruction {ins!r}", idx)
    if fc_at is not None:
        tail = instrs[fc_at + 1:]
        if tail and not (len(tail) == 1 and tail[0].direction is IODir.OUT_LABEL):
            raise ProgramError("FC must be last, optionally followed by IO OUT_LABEL", fc_at + 1)
