"""Execution trace records shared by the array model, simulator and perf model."""

from __future__ import annotations

import hashlib
from enum import Enum
from typing import IO, Iterable, NamedTuple


class EventKind(str, Enum):
    LD = "LD"
    CONV_STEP = "CONV_STEP"
    SRAM_RD = "SRAM_RD"
    SRAM_WR = "SRAM_WR"
    FC_EVAL = "FC_EVAL"
    IO = "IO"


class TraceEvent(NamedTuple):
    """One trace record.

    ``bits`` is the payload moved by the event (weight bits for LD, feature
    bits for SRAM_RD/SRAM_WR, weight bits read for FC_EVAL, staged or emitted
    bits for IO). ``thr_bits`` is only non-zero for LD and counts the
    threshold bits loaded next to the weights.
    """

    kind: EventKind
    layer: int
    phase: int
    bits: int = 0
    ops: int = 0
    thr_bits: int = 0


TRACE_MAGIC = "# binareye-trace v1"


def program_hash(words: Iterable[int]) -> str:
    h = hashlib.sha256()
    for w in words:
        h.update(int(w).to_bytes(4, "little"))
    return h.hexdigest()


def write_trace(events: Iterable[TraceEvent], fh: IO[str], prog_hash: str = "") -> None:
    fh.write(f"{TRACE_MAGIC}\n")
    fh.write(f"# program_sha256 {prog_hash}\n")
    fh.write("# columns kind layer phase bits ops thr_bits\n")
    for e in events:
        fh.write(f"{e.kind.value} {e.layer} {e.phase} {e.bits} {e.ops} {e.thr_bits}\n")


def read_trace(fh: IO[str]) -> tuple[list[TraceEvent], str]:
    """Parse a trace file; returns ``(events, program_hash)``."""
    events: list[TraceEvent] = []
    prog_hash = ""
    first = True
    for lineno, line in enumerate(fh, 1):
        line = line.strip()
        if first:
            if line != TRACE_MAGIC:
                raise ValueError(f"line {lineno}: not a binareye trace file")
            first = False
            continue
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "program_sha256":
                prog_hash = parts[1]
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ValueError(f"line {lineno}: expected 6 fields, got {len(fields)}")
        try:
            kind = EventKind(fields[0])
            nums = [int(f) for f in fields[1:]]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        events.append(TraceEvent(kind, *nums))
    if first:
        raise ValueError("empty trace file")
    return events, prog_hash
