"""Time the compiled kernels against the numpy/pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the ``RSUCOAL_BACKEND`` setting
does not matter here. Results are checked for equality before timing.
"""
import argparse
import timeit

import numpy as np

from rsucoal import _purepy
from rsucoal.experiments import ExperimentConfig, sample_scenario
from rsucoal.model import mask_members
from rsucoal.oracle import subset_values

try:
    from rsucoal import _kernels
except ImportError:
    _kernels = None


def assignment_case(n):
    scenario = sample_scenario(ExperimentConfig(), np.random.default_rng(0), n=n)
    unary, pair, base = scenario.game.tables(mask_members((1 << n) - 1))
    return (unary, pair, base, 1e-9)


def partition_case(n):
    scenario = sample_scenario(ExperimentConfig(), np.random.default_rng(0), n=n)
    return (subset_values(scenario), n, 1e-9)


def bench(name, func_name, args, repeat):
    impls = {"python": _purepy}
    if _kernels is not None:
        impls["cython"] = _kernels
    results = {k: getattr(m, func_name)(*args) for k, m in impls.items()}
    if len({repr(v) for v in results.values()}) != 1:
        raise SystemExit(f"{name}: backends disagree: {results}")
    times = {}
    for k, m in impls.items():
        f = getattr(m, func_name)
        number = 1
        while timeit.timeit(lambda: f(*args), number=number) < 0.2:
            number *= 2
        times[k] = min(timeit.repeat(lambda: f(*args), number=number, repeat=repeat)) / number
    line = f"{name:<28} python {times['python'] * 1e3:10.3f} ms"
    if "cython" in times:
        line += f"   cython {times['cython'] * 1e3:10.3f} ms   speed-up {times['python'] / times['cython']:7.1f}x"
    print(line)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _kernels is None:
        print("compiled kernels not built; timing the fallback only")
    for s in (3, 6, 9):
        bench(f"assignment_search |S|={s}", "assignment_search", assignment_case(s), args.repeat)
    for n in (6, 8, 10):
        bench(f"partition_search n={n}", "partition_search", partition_case(n), args.repeat)


if __name__ == "__main__":
    main()
