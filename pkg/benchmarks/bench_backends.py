#!/usr/bin/env python3
"""Benchmark the compiled kernel core against its pure-Python twin.

Runs each kernel on identical inputs under both backends, reports per-call
wall time and the speedup, and verifies the outputs match bit for bit.

    python benchmarks/bench_backends.py [--horizon N] [--repeat K]
"""

import argparse
import time

import numpy as np

from truncsa._backend import available_backends


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(name, runners, repeat):
    times = {}
    results = {}
    for backend, fn in runners.items():
        times[backend] = timed(fn, repeat)
        results[backend] = fn()
    names = sorted(times)
    if len(names) == 2:
        a, b = results[names[0]], results[names[1]]
        agree = all(np.array_equal(x, y) for x, y in zip(a, b))
        speedup = times["pure"] / times["compiled"]
        print(f"{name:<22} compiled {times['compiled'] * 1e3:9.2f} ms   "
              f"pure {times['pure'] * 1e3:9.2f} ms   "
              f"speedup {speedup:6.1f}x   bit-identical: {agree}")
        if not agree:
            raise SystemExit(f"{name}: backends disagree")
    else:
        only = names[0]
        print(f"{name:<22} {only} {times[only] * 1e3:9.2f} ms   (single backend)")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    T = args.horizon

    backends = available_backends()
    print(f"backends available: {', '.join(sorted(backends))};  horizon {T}\n")

    rng = np.random.default_rng(0)
    xs = np.ascontiguousarray(rng.uniform(1e-3, 50.0, T))
    eps = np.ascontiguousarray(rng.standard_t(7, T))
    logx = np.ascontiguousarray(np.log(rng.gamma(0.1, 1.0, T)))
    xi = np.ascontiguousarray(rng.standard_normal(T))
    coeffs = np.array([3.0, 0.0, 0.0, 0.0, 5.0, -2.0, 1.0])

    def make_digamma(mod):
        out = np.empty(T)

        def run():
            mod.digamma_array(xs, out)
            return (out,)

        return run

    def make_poly(mod):
        z = np.empty(T)
        p = np.empty(T)
        h = np.zeros(T, dtype=np.uint8)

        def run():
            mod.poly_path(0.0, 2.0, coeffs, 3.0, 3.0, eps, z, p, h)
            return z, p, h

        return run

    def make_gamma(mod):
        th = np.empty(T)
        p = np.empty(T)
        h = np.zeros(T, dtype=np.uint8)
        dg = np.empty(T)
        tg = np.empty(T)

        def run():
            mod.gamma_shape_path(1.0, logx, 1, 0.1, 1.0, 0.0, 0.0, th, p, h, dg, tg)
            return th, p, h, dg, tg

        return run

    def make_ar1(mod):
        x = np.empty(T + 1)
        x[0] = 0.0
        th = np.empty(T)
        info = np.empty(T)

        def run():
            mod.ar1_path(0.0, 0.5, xi, x[1:])
            mod.ar1_rls(0.0, 1.0, x, th, info)
            return th, info

        return run

    cases = [
        ("digamma_array", make_digamma),
        ("poly_path", make_poly),
        ("gamma_shape_path", make_gamma),
        ("ar1_path + ar1_rls", make_ar1),
    ]
    for name, factory in cases:
        bench_case(name, {b: factory(mod) for b, mod in backends.items()},
                   args.repeat)


if __name__ == "__main__":
    main()
