"""Pure numpy fallback for the compiled kernels in ``_ckernels.pyx``."""

import numpy as np


def conv_partials(fmap: np.ndarray, weights: np.ndarray) -> np.ndarray:
    fmap = np.asarray(fmap, dtype=np.uint64)
    weights = np.asarray(weights, dtype=np.uint64)
    if fmap.ndim != 3 or fmap.shape[2] != 4 or weights.ndim != 2 or weights.shape[1] != 16:
        raise ValueError("expected (H, W, 4) map words and (N, 16) neuron words")
    h, w, _ = fmap.shape
    if h < 2 or w < 2:
        raise ValueError("feature map must be at least 2x2")
    # win[y, x, k, dy*2+dx] = word k of site (x+dx, y+dy)
    win = np.stack(
        [fmap[dy:h - 1 + dy, dx:w - 1 + dx, :] for dy in (0, 1) for dx in (0, 1)],
        axis=-1,
    )
    wk = weights.reshape(-1, 4, 4)
    mism = np.bitwise_count(win[:, :, None, :, :] ^ wk[None, None]).sum(axis=-1, dtype=np.int32)
    return (256 - 2 * mism).astype(np.int32)


def fc_scores(features: np.ndarray, classes: np.ndarray, n_bits: int) -> np.ndarray:
    features = np.asarray(features, dtype=np.uint64)
    classes = np.asarray(classes, dtype=np.uint64)
    if classes.shape[1] != features.shape[0]:
        raise ValueError("feature/class word count mismatch")
    mism = np.bitwise_count(classes ^ features[None, :]).sum(axis=1, dtype=np.int64)
    return n_bits - 2 * mism
