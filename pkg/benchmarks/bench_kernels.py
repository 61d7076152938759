#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure numpy fallback.

Runs the forward projector and the adjoint backprojection for each
available backend on the canonical two-disk-plus-bump phantom and prints
a timing table with speedups and the max relative deviation between the
backends' results.

    python benchmarks/bench_kernels.py [--ns 180 --nl 200 --n 128]
"""

import argparse
import time

import numpy as np

from ellrad.geometry import make_geometry
from ellrad.kernels import available_backends
from ellrad.phantom import GaussianBump, Phantom, canonical_phantoms
from ellrad.transform import SinogramSpec, adjoint, forward


def _time(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.9)
    ap.add_argument("--ns", type=int, default=180)
    ap.add_argument("--nl", type=int, default=200)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    g = make_geometry(args.alpha)
    base = canonical_phantoms(g)
    p = Phantom(base["two_disks"].shapes
                + (GaussianBump((0.0, 0.2 * g.b), g.b / 10.0, 0.5),))
    spec = SinogramSpec(args.ns, args.nl)

    backends = available_backends()
    print(f"backends: {', '.join(backends)}   "
          f"(ns={args.ns}, nl={args.nl}, n={args.n}, "
          f"workers={args.workers}, best of {args.repeat})")

    fwd_times = {}
    adj_times = {}
    sinos = {}
    imgs = {}
    for name in backends:
        fwd_times[name], sinos[name] = _time(
            lambda: forward(p, g, spec, workers=args.workers, backend=name),
            args.repeat)
        adj_times[name], imgs[name] = _time(
            lambda: adjoint(sinos[name], n=args.n, workers=args.workers,
                            backend=name),
            args.repeat)

    print(f"{'backend':>8}  {'forward [s]':>12}  {'adjoint [s]':>12}")
    for name in backends:
        print(f"{name:>8}  {fwd_times[name]:>12.4f}  {adj_times[name]:>12.4f}")

    if len(backends) == 2:
        a, b = backends  # numpy, cython
        print(f"\nspeedup (compiled vs numpy): "
              f"forward {fwd_times[a] / fwd_times[b]:.2f}x, "
              f"adjoint {adj_times[a] / adj_times[b]:.2f}x")
        dev_f = (np.abs(sinos[a].values - sinos[b].values).max()
                 / np.abs(sinos[a].values).max())
        dev_a = (np.abs(imgs[a].values - imgs[b].values).max()
                 / np.abs(imgs[a].values).max())
        print(f"max relative deviation: forward {dev_f:.2e}, "
              f"adjoint {dev_a:.2e}")


if __name__ == "__main__":
    main()
