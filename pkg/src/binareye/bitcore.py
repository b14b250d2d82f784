"""Bit-packed bipolar tensors and the XNOR/popcount/threshold primitives.

Encoding: bit 1 is +1, bit 0 is -1. Feature maps are packed channel-major
within each (x, y) site, 64 channels per uint64 word with channel 0 at the
least-significant bit; sites are stored row-major (y outer, x inner).
Dense tensors use the ``[c, x, y]`` index order throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

WORD_BITS = 64
FEATURE_CHANNELS = (64, 128, 256)
MAX_DIM = 32
PIXEL_MAX = 127


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a ``{0,1}`` array along its last axis into LSB-first uint64 words.

    The last axis is zero-padded up to a multiple of 64.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.shape[-1]
    pad = (-n) % WORD_BITS
    if pad:
        bits = np.concatenate([bits, np.zeros(bits.shape[:-1] + (pad,), np.uint8)], axis=-1)
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64)


def unpack_bits(words: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns the first ``n`` bits as uint8."""
    words = np.ascontiguousarray(np.asarray(words, dtype=np.uint64).astype("<u8"))
    raw = words.view(np.uint8)
    bits = np.unpackbits(raw, axis=-1, bitorder="little")
    return bits[..., :n]


@dataclass(frozen=True, eq=False)
class BinaryFeatureMap:
    """Packed ``C x W x H`` bipolar activation map.

    ``payload`` has shape ``(H, W, C // 64)``: ``payload[y, x, k]`` holds
    channels ``64k .. 64k+63`` of site ``(x, y)``.
    """

    channels: int
    width: int
    height: int
    payload: np.ndarray

    def __post_init__(self):
        if self.channels <= 0 or self.channels % WORD_BITS:
            raise ValueError(f"channel count {self.channels} is not a multiple of 64")
        if not (1 <= self.width <= MAX_DIM and 1 <= self.height <= MAX_DIM):
            raise ValueError(f"spatial size {self.width}x{self.height} outside 1..32")
        p = np.asarray(self.payload, dtype=np.uint64)
        expect = (self.height, self.width, self.channels // WORD_BITS)
        if p.size != expect[0] * expect[1] * expect[2]:
            raise ValueError(f"payload has {p.size} words, expected {np.prod(expect)}")
        object.__setattr__(self, "payload", _readonly(p.reshape(expect).copy()))

    @property
    def words(self) -> np.ndarray:
        """Flat word view in storage order."""
        return self.payload.reshape(-1)

    @property
    def n_bits(self) -> int:
        return self.channels * self.width * self.height

    def __eq__(self, other):
        if not isinstance(other, BinaryFeatureMap):
            return NotImplemented
        return (
            (self.channels, self.width, self.height)
            == (other.channels, other.width, other.height)
            and np.array_equal(self.payload, other.payload)
        )

    def __repr__(self):
        return f"BinaryFeatureMap(C={self.channels}, W={self.width}, H={self.height})"

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "BinaryFeatureMap":
        """Pack a dense ``[c, x, y]`` array of +1/-1 values (any channel multiple of 64)."""
        dense = np.asarray(dense)
        if dense.ndim != 3:
            raise ValueError("dense feature tensor must be 3-D [c, x, y]")
        if not np.isin(dense, (-1, 1)).all():
            raise ValueError("feature values must be +1 or -1")
        c, w, h = dense.shape
        if c % WORD_BITS:
            raise ValueError(f"channel count {c} is not a multiple of 64")
        bits = (dense.transpose(2, 1, 0) > 0).astype(np.uint8)
        return cls(c, w, h, pack_bits(bits))

    def to_dense(self) -> np.ndarray:
        """Return the ``[c, x, y]`` int8 array of +1/-1 values."""
        bits = unpack_bits(self.payload, self.channels)
        return (bits.astype(np.int8) * 2 - 1).transpose(2, 1, 0).copy()

    def flat_bits(self) -> np.ndarray:
        """Bits in storage order (y, x, c), as uint8."""
        return unpack_bits(self.payload, self.channels).reshape(-1)


def pack_features(values: Sequence[int], channels: int, width: int, height: int) -> BinaryFeatureMap:
    """Pack a flat list of bipolar values given in ``[c, x, y]`` C-order."""
    if channels not in FEATURE_CHANNELS:
        raise ValueError(f"channel count must be one of {FEATURE_CHANNELS}, got {channels}")
    for name, v in (("width", width), ("height", height)):
        if not 1 <= v <= MAX_DIM:
            raise ValueError(f"{name} {v} outside 1..{MAX_DIM}")
    arr = np.asarray(values)
    if arr.size != channels * width * height:
        raise ValueError(f"expected {channels * width * height} values, got {arr.size}")
    return BinaryFeatureMap.from_dense(arr.reshape(channels, width, height))


def unpack_features(fm: BinaryFeatureMap) -> list[int]:
    return fm.to_dense().reshape(-1).tolist()


@dataclass(frozen=True, eq=False)
class BipolarVector:
    """Packed length-``N`` bipolar vector. Pad bits past ``N`` are zero."""

    length: int
    bits: np.ndarray

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("negative length")
        words = np.asarray(self.bits, dtype=np.uint64).reshape(-1)
        n_words = -(-self.length // WORD_BITS)
        if words.size != n_words:
            raise ValueError(f"{words.size} words given for length {self.length}")
        tail = self.length % WORD_BITS
        if tail and int(words[-1]) >> tail:
            raise ValueError("pad bits beyond the vector length must be zero")
        object.__setattr__(self, "bits", _readonly(words.copy()))

    @classmethod
    def from_values(cls, values: Sequence[int]) -> "BipolarVector":
        arr = np.asarray(values).reshape(-1)
        if not np.isin(arr, (-1, 1)).all():
            raise ValueError("values must be +1 or -1")
        return cls(arr.size, pack_bits((arr > 0).astype(np.uint8)))

    @classmethod
    def from_int(cls, value: int, length: int) -> "BipolarVector":
        """Build from a Python int whose bit ``i`` is element ``i``."""
        if value < 0 or value >> length:
            raise ValueError(f"value does not fit in {length} bits")
        n_words = -(-length // WORD_BITS)
        words = [(value >> (WORD_BITS * i)) & (2**64 - 1) for i in range(n_words)]
        return cls(length, np.array(words, dtype=np.uint64))

    def values(self) -> np.ndarray:
        return unpack_bits(self.bits, self.length).astype(np.int8) * 2 - 1

    def complement(self) -> "BipolarVector":
        flipped = ~self.bits
        tail = self.length % WORD_BITS
        if tail:
            flipped[-1] &= np.uint64((1 << tail) - 1)
        return BipolarVector(self.length, flipped)

    def __eq__(self, other):
        if not isinstance(other, BipolarVector):
            return NotImplemented
        return self.length == other.length and np.array_equal(self.bits, other.bits)


def xnor_popcount(a: BipolarVector, w: BipolarVector) -> int:
    """Number of positions where ``a`` and ``w`` agree."""
    if a.length != w.length:
        raise ValueError(f"length mismatch: {a.length} vs {w.length}")
    # pad bits are zero in both operands, so they never count as a mismatch
    mismatches = int(np.bitwise_count(a.bits ^ w.bits).sum())
    return a.length - mismatches


def bipolar_dot(a: BipolarVector, w: BipolarVector) -> int:
    return 2 * xnor_popcount(a, w) - a.length


def sign_threshold(total: int, threshold: int) -> int:
    """Comparator: 1 (+1) iff ``total >= threshold``; ties go to +1."""
    return 1 if total >= threshold else 0


@dataclass(frozen=True, eq=False)
class IntegerImage:
    """3-channel 7-bit image. ``pixels[c, x, y]`` with ``c`` in R, G, B."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[0] != 3:
            raise ValueError(f"image must have shape (3, W, H), got {p.shape}")
        if not (1 <= p.shape[1] <= MAX_DIM and 1 <= p.shape[2] <= MAX_DIM):
            raise ValueError(f"image size {p.shape[1]}x{p.shape[2]} outside 1..32")
        if p.size and (p.min() < 0 or p.max() > PIXEL_MAX):
            raise ValueError("pixel values must lie in [0, 127]")
        object.__setattr__(self, "pixels", _readonly(p.astype(np.int32)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[2]

    @property
    def n_bits(self) -> int:
        return self.pixels.size * 7

    @classmethod
    def zeros(cls, width: int = 32, height: int = 32) -> "IntegerImage":
        return cls(np.zeros((3, width, height), np.int32))

    def __eq__(self, other):
        if not isinstance(other, IntegerImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)
