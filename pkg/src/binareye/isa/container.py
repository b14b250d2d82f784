"""``BNRY`` weight container: a MemoryImage on disk.

All integers little-endian::

    0   4s   magic "BNRY"
    4   u16  version (1)
    6   u16  layer count L
    8   u32  weight SRAM bytes
    12  u32  FC SRAM bytes
    16  u16  FC bias count B
    18  u16  reserved, 0
    20  L x (u8 kind, u8 s_mode, u16 reserved, u32 base, u32 length)
        B x i16 FC biases
        weight SRAM payload, then FC SRAM payload
"""

from __future__ import annotations

import struct

from binareye.isa.compiler import LayerEntry, MemoryImage

MAGIC = b"BNRY"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIHH")
_ENTRY = struct.Struct("<BBHII")
_KINDS = ("first", "cnn", "fc")


class ContainerError(ValueError):
    pass


def dumps(image: MemoryImage) -> bytes:
    out = [_HEADER.pack(MAGIC, VERSION, len(image.layers), len(image.weight_sram),
                        len(image.fc_sram), len(image.fc_biases), 0)]
    for e in image.layers:
        out.append(_ENTRY.pack(_KINDS.index(e.kind), e.s_mode, 0, e.base, e.length))
    out.append(struct.pack(f"<{len(image.fc_biases)}h", *image.fc_biases))
    out.append(image.weight_sram)
    out.append(image.fc_sram)
    return b"".join(out)


def loads(data: bytes) -> MemoryImage:
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise ContainerError(f"container truncated at byte {len(data)} (needed {pos + n})")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    magic, version, n_layers, w_bytes, fc_bytes, n_bias, _ = _HEADER.unpack(take(_HEADER.size))
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    entries = []
    for _ in range(n_layers):
        kind, s_mode, _, base, length = _ENTRY.unpack(take(_ENTRY.size))
        if kind >= len(_KINDS):
            raise ContainerError(f"unknown layer kind code {kind}")
        entries.append(LayerEntry(_KINDS[kind], s_mode, base, length))
    biases = struct.unpack(f"<{n_bias}h", take(2 * n_bias))
    weight_sram = take(w_bytes)
    fc_sram = take(fc_bytes)
    if pos != len(data):
        raise ContainerError(f"{len(data) - pos} trailing bytes after payload")
    return MemoryImage(weight_sram, fc_sram, tuple(biases), tuple(entries))


def write_container(path, image: MemoryImage) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(image))


def read_container(path) -> MemoryImage:
    with open(path, "rb") as fh:
        return loads(fh.read())
