"""The eight acceptance criteria, each reported as one PASS/FAIL line."""

import contextlib
import os
import time

import numpy as np
import pytest
from hypothesis import given, settings

from binareye import perf
from binareye.isa import CNNInstr, Program, assemble, benchmark9, compile_network, disassemble
from binareye.isa.container import dumps, loads
from binareye.isa.netdesc import BANK_BITS
from binareye.oracle.generate import random_params
from binareye.trace import EventKind
from binareye.verify import seed_shape, sweep

from conftest import ACCEPTANCE_RESULTS
from strategies import programs


@contextlib.contextmanager
def criterion(n, title):
    info = {}
    try:
        yield info
    except BaseException:
        line = f"[FAIL] criterion {n}: {title}"
        ACCEPTANCE_RESULTS.append(line)
        print(line)
        raise
    line = f"[PASS] criterion {n}: {title}" + (f" ({info['detail']})" if "detail" in info else "")
    ACCEPTANCE_RESULTS.append(line)
    print(line)


def test_c1_oracle_equivalence():
    with criterion(1, "oracle equivalence, 100 random nets x 10 inputs") as info:
        jobs = min(4, os.cpu_count() or 1)
        t0 = time.perf_counter()
        results = sweep(range(100), n_inputs=10, jobs=jobs)
        elapsed = time.perf_counter() - t0
        assert len(results) == 100
        bad = [r for r in results if not r.ok]
        assert not bad, f"mismatches: {[(r.seed, r.first_mismatch) for r in bad]}"
        shapes = [seed_shape(s) for s in range(100)]
        assert {s for _, s in shapes} == {1, 2, 4}
        assert min(d for d, _ in shapes) == 1 and max(d for d, _ in shapes) == 14
        assert elapsed < 60, f"{elapsed:.1f} s"
        info["detail"] = f"0 mismatches, {elapsed:.1f} s, {jobs} workers"


def test_c2_op_accounting(bench_builds):
    with criterion(2, "op accounting") as info:
        assert perf.count_ops(31, 31, 1) == 503_840_768
        layer1 = [e for e in bench_builds[1]["result"].trace if e.layer == 1]
        assert sum(e.ops for e in layer1) == 503_840_768
        total1 = sum(e.ops for e in bench_builds[1]["result"].trace)
        assert total1 == perf.net_totals(benchmark9(1))[0] == 2_013_347_840
        total4 = sum(e.ops for e in bench_builds[4]["result"].trace)
        assert total4 == 125_911_040 and round(total4 / 1e5) == 1259
        info["detail"] = f"{total1:,} / {total4:,}"


def test_c3_throughput(bench_builds):
    with criterion(3, "throughput calibration at 6 MHz") as info:
        p = perf.default_params(freq=6e6)
        rep = perf.report(bench_builds[1]["result"].trace, p)
        l1 = next(l for l in rep.layers if l.layer == 1)
        gops = perf.layer_gops(l1, p)
        assert abs(gops - 352) / 352 <= 0.15
        assert abs(rep.inf_per_s - 120) / 120 <= 0.15
        info["detail"] = f"layer 1 {gops:.1f} GOPS, {rep.inf_per_s:.1f} inf/s"


def test_c4_energy(bench_builds):
    with criterion(4, "energy calibration and S=2 prediction") as info:
        p = perf.calibrate(perf.reference_points(benchmark9))
        uj2 = perf.report(bench_builds[2]["result"].trace, p).uj_per_inf
        rep1 = perf.report(bench_builds[1]["result"].trace, p)
        assert rep1.uj_per_inf == pytest.approx(14.4) and \
            perf.report(bench_builds[4]["result"].trace, p).uj_per_inf == pytest.approx(0.92)
        assert abs(uj2 - 3.47) / 3.47 <= 0.10
        assert abs(rep1.i2l_tops_w - 145) / 145 <= 0.10
        info["detail"] = f"E(S=2) {uj2:.3f} uJ, I2L {rep1.i2l_tops_w:.1f} TOPS/W"


def test_c5_capacity(bench_builds):
    with criterion(5, "capacity arithmetic") as info:
        image = bench_builds[1]["image"]
        assert len(image.weight_sram) == 265_216 == 259 * 1024
        assert len(image.fc_sram) == 5_120
        # the first layer's unpooled 31x31 output is the largest map a bank ever holds
        largest = max(256 * (i.width - 1) * (i.height - 1)
                      for i in bench_builds[1]["program"] if isinstance(i, CNNInstr))
        assert largest == 246_016 <= BANK_BITS == 262_144
        info["detail"] = f"{len(image.weight_sram)} B + {len(image.fc_sram)} B, max map {largest} bits"


def test_c6_phase_law(bench_builds):
    with criterion(6, "phase law: 4/S LD events per CNN layer") as info:
        for s in (1, 2, 4):
            b = bench_builds[s]
            cnn_idx = [i for i, ins in enumerate(b["program"]) if isinstance(ins, CNNInstr)]
            for idx in cnn_idx:
                lds = [e for e in b["result"].trace if e.layer == idx and e.kind is EventKind.LD]
                assert len(lds) == 4 // s
        info["detail"] = "4 / 2 / 1 at S = 1 / 2 / 4"


def test_c7_application(bench_builds):
    with criterion(7, "application reports") as info:
        trace = bench_builds[4]["result"].trace
        r1 = perf.report(trace, power_budget=1e-3, battery_mwh=810)
        r10 = perf.report(trace, power_budget=10e-3, battery_mwh=810)
        assert r1.windows == 54
        assert abs(r1.fps_at_budget - 20) / 20 <= 0.10
        assert abs(r10.fps_at_budget - 200) / 200 <= 0.10
        assert r1.battery_days == pytest.approx(33.75)
        info["detail"] = (f"54 windows, {r1.fps_at_budget:.1f} fps @ 1 mW, "
                          f"{r10.fps_at_budget:.0f} fps @ 10 mW, {r1.battery_days:.2f} days")


_round_trips = {"n": 0}


@settings(max_examples=1000, deadline=None, derandomize=True)
@given(programs())
def _check_round_trip(prog):
    assert assemble(disassemble(prog)) == prog
    assert Program.from_words(prog.words()) == prog
    _round_trips["n"] += 1


def test_c8_round_trips(bench_builds):
    with criterion(8, "toolchain round-trips") as info:
        _round_trips["n"] = 0
        _check_round_trip()
        assert _round_trips["n"] >= 1000
        for s in (1, 2, 4):
            blob = dumps(bench_builds[s]["image"])
            assert dumps(loads(blob)) == blob
        net = benchmark9(1)
        _, image = compile_network(net, random_params(net, np.random.default_rng(7)))
        assert dumps(loads(dumps(image))) == dumps(image)
        info["detail"] = f"{_round_trips['n']} programs, containers byte-identical"
