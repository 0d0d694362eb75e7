"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from kraichnan._accel import _fallback

try:
    from kraichnan._accel import _core
except ImportError:
    _core = None


def cases(rng):
    normals = rng.standard_normal(10**6)
    yield "ar1 (1e6 steps)", lambda m: m.ar1(0.3, 0.99, 0.1, normals)

    levels = 6
    values = np.cumsum(rng.standard_normal(20001)) * 0.05
    bn = rng.standard_normal((values.size - 1, 2**levels - 1))
    yield "bridge_crossings (2e4 x 6 levels)", lambda m: m.bridge_crossings(values, 0.0, 0.01, bn, levels)

    inc = rng.standard_normal((1000, 401))
    pos = rng.uniform(-9.9, 9.9, (500, 1000))
    yield "curvilinear_sum (500 paths x 1000 steps)", lambda m: m.curvilinear_sum(inc, -10.0, 0.05, pos)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, call in cases(rng):
        t_py = min(timeit.repeat(lambda: call(_fallback), number=1, repeat=args.repeat)) * 1e3
        if _core is None:
            print(f"{name:42s} {t_py:12.2f} {'n/a':>12s} {'':>8s}")
            continue
        assert np.allclose(call(_fallback), call(_core))
        t_cy = min(timeit.repeat(lambda: call(_core), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:42s} {t_py:12.2f} {t_cy:12.2f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
