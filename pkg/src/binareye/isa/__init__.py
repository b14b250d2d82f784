"""Instruction set, assembler, network compiler and weight container."""

from binareye.isa.assembler import AsmError, assemble, disassemble
from binareye.isa.compiler import CompileError, LayerEntry, MemoryImage, compile_network
from binareye.isa.instructions import (
    Bank,
    CNNInstr,
    FCInstr,
    IODir,
    IOInstr,
    ISAError,
    Program,
    decode_instruction,
    encode_instruction,
)
from binareye.isa.netdesc import (
    LayerSpec,
    NetworkDescription,
    benchmark9,
    check_constraints,
    format_net,
    parse_net,
)

__all__ = [
    "AsmError", "Bank", "CNNInstr", "CompileError", "FCInstr", "IODir", "IOInstr", "ISAError",
    "LayerEntry", "LayerSpec", "MemoryImage", "NetworkDescription", "Program", "assemble",
    "benchmark9", "check_constraints", "compile_network", "decode_instruction", "disassemble",
    "encode_instruction", "format_net", "parse_net",
]
