"""Seeded random networks that satisfy every compile constraint."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from binareye.isa.netdesc import WEIGHT_SRAM_BYTES, LayerSpec, NetworkDescription, layer_weight_bytes
from binareye.oracle.model import DenseLayer, DenseNet


class RandomInstance(NamedTuple):
    net: NetworkDescription
    dense: DenseNet
    image: object  # MemoryImage
    program: object  # Program


def _geometry(rng: np.random.Generator, depth: int, max_tries: int = 200):
    """Pick pool flags and an input size so the final map is at most 4096 bits.

    Works backwards from a final spatial size of at most 16 sites.
    """
    for _ in range(max_tries):
        wf, hf = (int(v) for v in rng.integers(1, 5, size=2))
        pools = rng.random(depth) < 0.3
        w, h = wf, hf
        for pool in pools[::-1]:
            if pool:
                w, h = 2 * w + int(rng.integers(0, 2)), 2 * h + int(rng.integers(0, 2))
            w, h = w + 1, h + 1
        if w <= 32 and h <= 32:
            return [bool(p) for p in pools], w, h
    raise ValueError(f"could not find a feasible geometry for depth {depth}")


def max_depth(s_mode: int) -> int:
    """Deepest net whose weights fit the weight SRAM (8, 14, 14 for S = 1, 2, 4)."""
    return min(14, WEIGHT_SRAM_BYTES // layer_weight_bytes(s_mode))


def random_params(net, rng: np.random.Generator) -> DenseNet:
    """Random +1/-1 weights and moderate thresholds for a NetworkDescription."""
    s_mode = net.s_mode
    per = 256 // s_mode
    sign = lambda shape: (rng.integers(0, 2, size=shape, dtype=np.int8) * 2 - 1)  # noqa: E731
    layers = []
    for i, spec in enumerate(net.cnn_layers):
        if i == 0:
            # first-layer dots have std ~ 250 for uniform 7-bit pixels
            layers.append(DenseLayer("first", s_mode, sign((per, 3, 2, 2)),
                                     rng.integers(-300, 301, size=(s_mode, per)), spec.pool))
        else:
            spread = int(1.5 * np.sqrt(per * 4))
            layers.append(DenseLayer("cnn", s_mode, sign((s_mode, per, per, 2, 2)),
                                     rng.integers(-spread, spread + 1, size=(s_mode, per)), spec.pool))
    fc = net.fc
    if fc is not None:
        fw, fh = net.final_shape()
        layers.append(DenseLayer("fc", s_mode, sign((fc.classes, 256 * fw * fh)),
                                 rng.integers(-16, 17, size=fc.classes)))
    return DenseNet(s_mode, net.width, net.height, layers)


def random_dense(seed: int, depth: int, s_mode: int, classes: int | None = None) -> DenseNet:
    if s_mode not in (1, 2, 4):
        raise ValueError(f"invalid S-mode {s_mode}")
    if not 1 <= depth <= max_depth(s_mode):
        raise ValueError(f"depth {depth} infeasible at S={s_mode}: need 1..{max_depth(s_mode)}")
    rng = np.random.default_rng(seed)
    pools, w, h = _geometry(rng, depth)
    n_classes = int(rng.integers(2, 11)) if classes is None else classes
    specs = tuple(LayerSpec("cnn", p) for p in pools) + (LayerSpec("fc", classes=n_classes),)
    return random_params(NetworkDescription(specs, s_mode, w, h), rng)


def describe(dense: DenseNet, name: str = "random") -> NetworkDescription:
    specs = []
    for layer in dense.layers:
        if layer.kind == "fc":
            specs.append(LayerSpec("fc", classes=layer.weights.shape[0]))
        else:
            specs.append(LayerSpec("cnn", bool(layer.pool)))
    return NetworkDescription(tuple(specs), dense.s_mode, dense.width, dense.height, name=name)


def random_network(seed: int, depth: int, s_mode: int) -> RandomInstance:
    """Deterministic in ``seed``: description, dense parameters and packed image from one draw."""
    from binareye.isa.compiler import compile_network

    dense = random_dense(seed, depth, s_mode)
    net = describe(dense, f"random-{seed}")
    program, image = compile_network(net, dense)
    return RandomInstance(net, dense, image, program)


def random_pixels(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    return rng.integers(0, 128, size=(3, width, height), dtype=np.int32)
