import numpy as np
import pytest

from binareye.bitcore import IntegerImage
from binareye.isa import benchmark9, compile_network
from binareye.oracle.generate import random_params
from binareye.simulator import run

ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session")
def bench_builds():
    """Benchmark net compiled and simulated (zero image) at S = 1, 2, 4."""
    out = {}
    for s in (1, 2, 4):
        net = benchmark9(s)
        dense = random_params(net, np.random.default_rng(0))
        program, image = compile_network(net, dense)
        result = run(program, image, IntegerImage.zeros())
        out[s] = dict(net=net, dense=dense, program=program, image=image, result=result)
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
