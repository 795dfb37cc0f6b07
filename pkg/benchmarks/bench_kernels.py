"""Time the compiled and pure-Python sequence-sum kernels on balanced chains.

Usage: python benchmarks/bench_kernels.py [--max-sources 14] [--repeat 5]
"""

import argparse
import timeit

from swapcalc import _kernels_py

try:
    from swapcalc import _ckernels
except ImportError:
    _ckernels = None


def chain_inputs(n, p=0.05, eta=0.3):
    p2 = 0.75 * p * p
    probs = [(1.0 - p - p2, p, p2)] * n
    channels = [1.0] + [eta] * (2 * n - 2) + [1.0]
    return probs, channels


def best_time(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-sources", type=int, default=14)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; timing the Python kernel only")
    print(f"{'N':>3} {'visited':>9} {'python_s':>12} {'cython_s':>12} {'speedup':>8}")
    for n in range(2, args.max_sources + 1, 2):
        probs, eta = chain_inputs(n)
        for s in (3.0, 0.0):
            visited = _kernels_py.chain_sums(probs, eta, s)[3]
            tp = best_time(_kernels_py.chain_sums, (probs, eta, s), args.repeat)
            if _ckernels is not None:
                assert _ckernels.chain_sums(probs, eta, s) == _kernels_py.chain_sums(probs, eta, s)
                tc = best_time(_ckernels.chain_sums, (probs, eta, s), args.repeat)
                print(f"{n:>3} {visited:>9} {tp:>12.3e} {tc:>12.3e} {tp / tc:>8.1f}  sigma^2={s:g}")
            else:
                print(f"{n:>3} {visited:>9} {tp:>12.3e} {'-':>12} {'-':>8}  sigma^2={s:g}")


if __name__ == "__main__":
    main()
