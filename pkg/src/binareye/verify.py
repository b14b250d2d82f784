"""Seeded simulator-vs-oracle equivalence sweep."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from binareye.bitcore import IntegerImage
from binareye.oracle.generate import max_depth, random_network, random_pixels
from binareye.oracle.reference import ref_layer_outputs
from binareye.simulator import run


@dataclass
class SeedResult:
    seed: int
    depth: int
    s_mode: int
    inputs: int
    mismatches: int
    first_mismatch: str = ""

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def seed_shape(seed: int) -> tuple[int, int]:
    """``(depth, s_mode)`` drawn for a seed; depth covers everything the weight SRAM allows."""
    rng = np.random.default_rng([seed, 0])
    s_mode = int(rng.choice([1, 2, 4]))
    return int(rng.integers(1, max_depth(s_mode) + 1)), s_mode


def check_seed(seed: int, n_inputs: int = 10) -> SeedResult:
    depth, s_mode = seed_shape(seed)
    inst = random_network(seed, depth, s_mode)
    rng = np.random.default_rng([seed, 1])
    bad = 0
    first = ""
    for k in range(n_inputs):
        pix = random_pixels(rng, inst.dense.width, inst.dense.height)
        sim = run(inst.program, inst.image, IntegerImage(pix), record_trace=False, keep_maps=True)
        maps, scores, label = ref_layer_outputs(pix, inst.dense)
        where = ""
        if len(maps) != len(sim.layer_maps):
            where = f"layer count {len(sim.layer_maps)} vs {len(maps)}"
        else:
            for li, (got, want) in enumerate(zip(sim.layer_maps, maps)):
                dense = got.to_dense()
                if dense.shape != want.shape or not np.array_equal(dense, want):
                    where = f"layer {li}"
                    break
        if not where and (sim.scores != scores or sim.label != label):
            where = "FC scores/label"
        if where:
            bad += 1
            first = first or f"input {k}: {where}"
    return SeedResult(seed, depth, s_mode, n_inputs, bad, first)


def sweep(seeds, n_inputs: int = 10, jobs: int = 1) -> list[SeedResult]:
    seeds = list(seeds)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(check_seed, seeds, [n_inputs] * len(seeds)))
    return [check_seed(s, n_inputs) for s in seeds]
