"""Integer reference semantics on dense +1/-1 arrays.

Deliberately independent of the packed datapath: no bit packing, no
popcount, nothing imported from ``bitcore`` or ``neuron_array``. Feature
tensors are ``[c, x, y]`` arrays over the 256 concatenated channels.
"""

from __future__ import annotations

import numpy as np

from binareye.oracle.model import DenseLayer, DenseNet

CHANNELS = 256


def _sign(total: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    return np.where(total - thresholds >= 0, 1, -1).astype(np.int8)


def ref_conv_naive(inp: np.ndarray, weights: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Plain loop version of one ungrouped 2x2 layer. Slow; for small cross-checks."""
    c_in, w, h = inp.shape
    f_out = weights.shape[0]
    out = np.empty((f_out, w - 1, h - 1), np.int8)
    for f in range(f_out):
        for x in range(w - 1):
            for y in range(h - 1):
                total = 0
                for c in range(c_in):
                    for dy in range(2):
                        for dx in range(2):
                            total += int(weights[f, c, dy, dx]) * int(inp[c, x + dx, y + dy])
                out[f, x, y] = 1 if total - int(thresholds[f]) >= 0 else -1
    return out


def _conv_sums(inp: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Integer 2x2 valid correlation; ``weights`` is ``[f, c, dy, dx]``."""
    _, w, h = inp.shape
    x = inp.astype(np.float64)
    wt = weights.astype(np.float64)
    total = np.zeros((weights.shape[0], w - 1, h - 1))
    for dy in range(2):
        for dx in range(2):
            # float64 is exact here: |sums| <= 256 * 4 * 127
            total += np.tensordot(wt[:, :, dy, dx], x[:, dx:w - 1 + dx, dy:h - 1 + dy], axes=(1, 0))
    return np.rint(total).astype(np.int64)


def ref_pool(inp: np.ndarray) -> np.ndarray:
    c, w, h = inp.shape
    if w < 2 or h < 2:
        raise ValueError(f"cannot pool a {w}x{h} map")
    wo, ho = w // 2, h // 2
    v = inp[:, :2 * wo, :2 * ho].reshape(c, wo, 2, ho, 2)
    return v.max(axis=(2, 4))


def ref_conv_layer(inp: np.ndarray, layer: DenseLayer) -> np.ndarray:
    """Grouped binary conv over the 256-channel space; pooling is not applied here."""
    s = layer.s_mode
    per = CHANNELS // s
    if inp.shape[0] != CHANNELS or layer.weights.shape != (s, per, per, 2, 2):
        raise ValueError(f"shape mismatch: input {inp.shape}, weights {layer.weights.shape}")
    if inp.shape[1] < 2 or inp.shape[2] < 2:
        raise ValueError("input smaller than 2x2")
    outs = []
    for m in range(s):
        sums = _conv_sums(inp[m * per:(m + 1) * per], layer.weights[m])
        outs.append(_sign(sums, layer.thresholds[m][:, None, None]))
    return np.concatenate(outs, axis=0)


def ref_first_layer(pixels: np.ndarray, layer: DenseLayer) -> np.ndarray:
    s = layer.s_mode
    per = CHANNELS // s
    pixels = np.asarray(pixels)
    if pixels.shape[0] != 3 or layer.weights.shape != (per, 3, 2, 2):
        raise ValueError(f"shape mismatch: image {pixels.shape}, weights {layer.weights.shape}")
    if pixels.min() < 0 or pixels.max() > 127:
        raise ValueError("pixel outside 7-bit range")
    sums = _conv_sums(pixels, layer.weights)
    return np.concatenate([_sign(sums, layer.thresholds[m][:, None, None]) for m in range(s)], axis=0)


def ref_fc(features: np.ndarray, layer: DenseLayer) -> tuple[list[int], int]:
    flat = np.asarray(features).transpose(2, 1, 0).reshape(-1).astype(np.int64)
    wts = np.asarray(layer.weights, dtype=np.int64)
    if wts.shape[1] != flat.size:
        raise ValueError(f"FC expects {wts.shape[1]} features, got {flat.size}")
    scores = [int(wts[c] @ flat) + int(layer.thresholds[c]) for c in range(wts.shape[0])]
    label = 0
    for c, v in enumerate(scores):
        if v > scores[label]:
            label = c
    return scores, label


def ref_layer_outputs(pixels: np.ndarray, net: DenseNet) -> tuple[list[np.ndarray], list[int], int]:
    """Dense outputs after every CNN layer (post-pool), then FC scores and label.

    Without an FC layer the scores list is empty and the label is -1.
    """
    maps = []
    x = None
    for layer in net.layers:
        if layer.kind == "first":
            x = ref_first_layer(pixels, layer)
        elif layer.kind == "cnn":
            x = ref_conv_layer(x, layer)
        elif layer.kind == "fc":
            scores, label = ref_fc(x, layer)
            return maps, scores, label
        else:
            raise ValueError(f"unknown layer kind {layer.kind!r}")
        if layer.pool:
            x = ref_pool(x)
        maps.append(x)
    return maps, [], -1


def ref_network(pixels: np.ndarray, net: DenseNet) -> int:
    return ref_layer_outputs(pixels, net)[2]
