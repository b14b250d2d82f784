"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from binareye import _pykernels

try:
    from binareye import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(rng):
    fmap = rng.integers(0, 2**64, size=(32, 32, 4), dtype=np.uint64)
    weights = rng.integers(0, 2**64, size=(64, 16), dtype=np.uint64)
    feats = rng.integers(0, 2**64, size=64, dtype=np.uint64)
    classes = rng.integers(0, 2**64, size=(10, 64), dtype=np.uint64)
    return {
        "conv_partials 32x32, 64 neurons": ("conv_partials", (fmap, weights)),
        "fc_scores 4096 bits x 10": ("fc_scores", (feats, classes, 4096)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':<34} " + " ".join(f"{n + ' ms':>12}" for n, _ in backends) + f" {'speedup':>8}")
    for label, (fn, fargs) in cases(rng).items():
        results = [getattr(mod, fn)(*fargs) for _, mod in backends]
        assert all(np.array_equal(results[0], r) for r in results[1:]), "backends disagree"
        times = [min(timeit.repeat(lambda m=mod: getattr(m, fn)(*fargs), number=1, repeat=args.repeat)) * 1e3
                 for _, mod in backends]
        speed = f"{times[0] / times[-1]:>7.1f}x" if len(times) > 1 else "     n/a"
        print(f"{label:<34} " + " ".join(f"{t:>12.3f}" for t in times) + f" {speed}")


if __name__ == "__main__":
    main()
