"""Dense (unpacked) network parameters.

This is both the oracle's input and the compiler's "trained parameter set".

Shapes, with S the width mode and F = 256/S:

* ``first``: ``weights`` (F, 3, 2, 2) as ``[f, c, dy, dx]``, ``thresholds`` (S, F).
  Feature ``f`` of map ``m`` is ``dot_f >= thresholds[m, f]``.
* ``cnn``: ``weights`` (S, F, F, 2, 2) as ``[m, f, c, dy, dx]``, ``thresholds`` (S, F).
  Map ``m`` sees only its own F input channels.
* ``fc``: ``weights`` (classes, n_bits), ``thresholds`` holds the class biases.
  Features are flattened in (y, x, c) order over the 256 concatenated channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DenseLayer:
    kind: str
    s_mode: int
    weights: np.ndarray
    thresholds: np.ndarray
    pool: bool = False


@dataclass
class DenseNet:
    s_mode: int
    width: int
    height: int
    layers: list

    @property
    def fc(self):
        return self.layers[-1] if self.layers and self.layers[-1].kind == "fc" else None


def save_dense(path, net: DenseNet) -> None:
    """Store a parameter set as ``.npz`` (one weights/thresholds pair per layer)."""
    arrays = {"meta": np.array([net.s_mode, net.width, net.height, len(net.layers)])}
    for i, layer in enumerate(net.layers):
        arrays[f"kind{i}"] = np.array(layer.kind)
        arrays[f"pool{i}"] = np.array(int(layer.pool))
        arrays[f"w{i}"] = np.asarray(layer.weights, dtype=np.int8)
        arrays[f"t{i}"] = np.asarray(layer.thresholds, dtype=np.int64)
    np.savez(path, **arrays)


def load_dense(path) -> DenseNet:
    with np.load(path, allow_pickle=False) as z:
        s_mode, width, height, n = (int(v) for v in z["meta"])
        layers = [
            DenseLayer(str(z[f"kind{i}"]), s_mode, z[f"w{i}"].astype(np.int8),
                       z[f"t{i}"].astype(np.int64), bool(z[f"pool{i}"]))
            for i in range(n)
        ]
    return DenseNet(s_mode, width, height, layers)
