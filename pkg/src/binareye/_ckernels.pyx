# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled XNOR-popcount kernels. Mirrors ``binareye._pykernels``."""

import numpy as np

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

ctypedef unsigned long long u64


def conv_partials(const u64[:, :, ::1] fmap, const u64[:, ::1] weights):
    """Sub-neuron partial sums of a stride-1 2x2 convolution.

    ``fmap`` is ``(H, W, 4)`` words of a 256-channel packed map, ``weights``
    is ``(N, 16)`` neuron words ordered sub-neuron, dy, dx. Returns int32
    ``(H-1, W-1, N, 4)``.
    """
    cdef Py_ssize_t h = fmap.shape[0], w = fmap.shape[1]
    cdef Py_ssize_t n = weights.shape[0]
    cdef Py_ssize_t y, x, j, k, dy, dx
    cdef int mism
    if fmap.shape[2] != 4 or weights.shape[1] != 16:
        raise ValueError("expected (H, W, 4) map words and (N, 16) neuron words")
    if h < 2 or w < 2:
        raise ValueError("feature map must be at least 2x2")
    out = np.empty((h - 1, w - 1, n, 4), dtype=np.int32)
    cdef int[:, :, :, ::1] o = out
    with nogil:
        for y in range(h - 1):
            for x in range(w - 1):
                for j in range(n):
                    for k in range(4):
                        mism = 0
                        for dy in range(2):
                            for dx in range(2):
                                mism = mism + __builtin_popcountll(
                                    fmap[y + dy, x + dx, k] ^ weights[j, k * 4 + dy * 2 + dx])
                        o[y, x, j, k] = 256 - 2 * mism
    return out


def fc_scores(const u64[::1] features, const u64[:, ::1] classes, Py_ssize_t n_bits):
    """Bipolar dot of one packed feature vector against each packed class row."""
    cdef Py_ssize_t c, i, m = classes.shape[0], nw = classes.shape[1]
    cdef long mism
    if features.shape[0] != nw:
        raise ValueError("feature/class word count mismatch")
    out = np.empty(m, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for c in range(m):
            mism = 0
            for i in range(nw):
                mism = mism + __builtin_popcountll(features[i] ^ classes[c, i])
            o[c] = n_bits - 2 * mism
    return out
