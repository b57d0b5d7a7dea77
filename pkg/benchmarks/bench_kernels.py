#!/usr/bin/env python3
"""Benchmark the compiled per-example kernels against the NumPy fallback.

Times forward_one / backward_one / grand_norm_one over a batch of random
examples for each available backend, verifies the backends agree, and prints
per-example timings plus the speedup.

    python benchmarks/bench_kernels.py [--widths 784,128,10] [--examples 512]
"""

import argparse
import time

import numpy as np

from prunekit._kernels import pykernels
from prunekit.nn import ModelSpec, init_params

try:
    from prunekit._kernels import cykernels
except ImportError:
    cykernels = None


def time_op(fn, params, xs, ys, repeats):
    relu = params.activation == "relu"
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for x, y in zip(xs, ys):
            fn(params.weights, params.biases, relu, x, y)
        best = min(best, time.perf_counter() - start)
    return best / len(xs)


def time_forward(mod, params, xs, repeats):
    relu = params.activation == "relu"
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for x in xs:
            mod.forward_one(params.weights, params.biases, relu, x)
        best = min(best, time.perf_counter() - start)
    return best / len(xs)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--widths", default="784,128,10")
    ap.add_argument("--examples", type=int, default=512)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    widths = tuple(int(w) for w in args.widths.split(","))
    spec = ModelSpec(widths)
    params = init_params(spec, args.seed)
    rng = np.random.default_rng(args.seed)
    xs = [rng.standard_normal(widths[0]) for _ in range(args.examples)]
    ys = [int(rng.integers(widths[-1])) for _ in range(args.examples)]

    backends = [("python", pykernels)]
    if cykernels is not None:
        backends.append(("cython", cykernels))
    else:
        print("compiled extension not built; benchmarking the fallback only")

    # agreement check before timing
    if cykernels is not None:
        worst = 0.0
        for x, y in zip(xs[:64], ys[:64]):
            a = pykernels.grand_norm_one(params.weights, params.biases, True, x, y)
            b = cykernels.grand_norm_one(params.weights, params.biases, True, x, y)
            worst = max(worst, abs(a - b) / abs(b))
        print(f"backend agreement on grand_norm_one: max rel deviation {worst:.2e}")
        assert worst < 1e-9, "backends disagree beyond tolerance"

    results = {}
    for name, mod in backends:
        fwd = time_forward(mod, params, xs, args.repeats)
        bwd = time_op(mod.backward_one, params, xs, ys, args.repeats)
        gnd = time_op(mod.grand_norm_one, params, xs, ys, args.repeats)
        results[name] = (fwd, bwd, gnd)

    print(f"\nmodel {widths}, {args.examples} examples, best of {args.repeats} (per example)")
    print(f"{'op':<16}" + "".join(f"{name:>14}" for name, _ in backends) + ("   speedup" if len(backends) == 2 else ""))
    for i, op in enumerate(("forward_one", "backward_one", "grand_norm_one")):
        row = f"{op:<16}"
        for name, _ in backends:
            row += f"{results[name][i] * 1e6:>11.1f} us"
        if len(backends) == 2:
            row += f"{results['python'][i] / results['cython'][i]:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
