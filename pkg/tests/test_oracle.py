import ast
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import binareye.oracle.reference as reference
from binareye.bitcore import IntegerImage
from binareye.oracle.generate import random_network, random_pixels
from binareye.oracle.model import DenseLayer, DenseNet, load_dense, save_dense
from binareye.oracle.reference import (
    _conv_sums,
    ref_conv_layer,
    ref_conv_naive,
    ref_fc,
    ref_first_layer,
    ref_layer_outputs,
    ref_network,
)
from binareye.simulator import run


def test_saturating_identity():
    rng = np.random.default_rng(0)
    w = rng.choice([-1, 1], size=(4, 64, 64, 2, 2)).astype(np.int8)
    x = np.concatenate([w[m, 0] for m in range(4)], axis=0)  # 256 x 2 x 2 equal to each map's neuron 0
    out = ref_conv_layer(x, DenseLayer("cnn", 4, w, np.full((4, 64), -64 * 4)))
    assert (out == 1).all()


def test_hand_enumerated_window():
    rng = np.random.default_rng(1)
    inp = rng.choice([-1, 1], size=(64, 3, 3))
    w = rng.choice([-1, 1], size=(1, 64, 2, 2))
    manual = 0
    for c in range(64):
        manual += w[0, c, 0, 0] * inp[c, 1, 1] + w[0, c, 0, 1] * inp[c, 2, 1]
        manual += w[0, c, 1, 0] * inp[c, 1, 2] + w[0, c, 1, 1] * inp[c, 2, 2]
    assert _conv_sums(inp, w)[0, 1, 1] == manual
    out = ref_conv_naive(inp, w, [manual])
    assert out[0, 1, 1] == 1
    assert ref_conv_naive(inp, w, [manual + 1])[0, 1, 1] == -1


def test_fast_matches_naive():
    rng = np.random.default_rng(2)
    inp = rng.choice([-1, 1], size=(64, 4, 3))
    w = rng.choice([-1, 1], size=(5, 64, 2, 2))
    t = rng.integers(-10, 11, size=5)
    fast = np.where(_conv_sums(inp, w) - t[:, None, None] >= 0, 1, -1)
    np.testing.assert_array_equal(fast, ref_conv_naive(inp, w, t))


def test_first_layer_zero_tie():
    layer = DenseLayer("first", 1, -np.ones((256, 3, 2, 2), np.int8), np.zeros((1, 256), int))
    assert (ref_first_layer(np.zeros((3, 32, 32), int), layer) == 1).all()
    with pytest.raises(ValueError, match="7-bit"):
        ref_first_layer(np.full((3, 4, 4), 128), layer)


def test_fc_matching_class_wins():
    rng = np.random.default_rng(3)
    x = rng.choice([-1, 1], size=(256, 2, 2))
    flat = x.transpose(2, 1, 0).reshape(-1)
    w = rng.choice([-1, 1], size=(6, 1024))
    w[4] = flat
    assert ref_fc(x, DenseLayer("fc", 1, w, np.zeros(6, int)))[1] == 4


def test_random_network_runs_and_is_deterministic():
    a = random_network(0, 1, 4)
    b = random_network(0, 1, 4)
    assert a.net == b.net and a.program == b.program and a.image == b.image
    for la, lb in zip(a.dense.layers, b.dense.layers):
        np.testing.assert_array_equal(la.weights, lb.weights)
    pix = random_pixels(np.random.default_rng(0), a.net.width, a.net.height)
    assert run(a.program, a.image, IntegerImage(pix)).label == ref_network(pix, a.dense)
    assert random_network(1, 1, 4).image != a.image


@pytest.mark.parametrize("seed, depth, s", [(5, 3, 1), (6, 7, 2), (7, 11, 4)])
def test_layer_boundary_equivalence(seed, depth, s):
    inst = random_network(seed, depth, s)
    pix = random_pixels(np.random.default_rng(seed), inst.net.width, inst.net.height)
    res = run(inst.program, inst.image, IntegerImage(pix), keep_maps=True)
    maps, scores, label = ref_layer_outputs(pix, inst.dense)
    assert len(maps) == depth
    for got, want in zip(res.layer_maps, maps):
        np.testing.assert_array_equal(got.to_dense(), want)
    assert (res.scores, res.label) == (scores, label)


def test_oracle_source_imports_no_datapath():
    tree = ast.parse(Path(reference.__file__).read_text())
    mods = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            mods.update(a.name for a in node.names)
        elif isinstance(node, ast.ImportFrom):
            mods.add(node.module)
    assert mods <= {"__future__", "numpy", "binareye.oracle.model"}


def test_oracle_import_does_not_load_datapath():
    code = ("import sys, binareye.oracle.reference; "
            "print(any(m in sys.modules for m in ('binareye.bitcore', 'binareye.neuron_array', 'binareye.kernels')))")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_dense_save_load(tmp_path):
    inst = random_network(2, 2, 2)
    save_dense(tmp_path / "p.npz", inst.dense)
    back = load_dense(tmp_path / "p.npz")
    assert isinstance(back, DenseNet) and back.s_mode == 2
    for la, lb in zip(inst.dense.layers, back.layers):
        assert la.kind == lb.kind and bool(la.pool) == bool(lb.pool)
        np.testing.assert_array_equal(la.weights, lb.weights)
        np.testing.assert_array_equal(la.thresholds, lb.thresholds)
