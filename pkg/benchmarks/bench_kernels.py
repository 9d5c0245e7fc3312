"""Compiled vs pure-Python kernel timings.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time of each kernel on both backends and
the speed-up. Without the compiled extension only the fallback is timed.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cdnoma import kernels
from cdnoma.channel import _gauss_legendre


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    x, w = _gauss_legendre(64)
    phi = 0.3 + np.deg2rad(2.0) * x
    th = 0.2 + np.deg2rad(2.0) * x
    rng = np.random.default_rng(0)
    costs = {n: rng.random((n, n)) for n in (64, 128, 256)}
    out = [
        ("onering_lags_2d M=64", lambda b: b.onering_lags_2d(np.sin(phi), w, 64)),
        ("onering_lags_2d M=256", lambda b: b.onering_lags_2d(np.sin(phi), w, 256)),
        ("onering_lags_3d M=64", lambda b: b.onering_lags_3d(np.sin(th), np.cos(th), w,
                                                              np.sin(phi), w, 8)),
        ("onering_lags_3d M=144", lambda b: b.onering_lags_3d(np.sin(th), np.cos(th), w,
                                                               np.sin(phi), w, 12)),
    ]
    for n, c in costs.items():
        out.append((f"linear_assignment n={n}", lambda b, c=c: b.linear_assignment(c)))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = [("python", kernels.python)]
    if kernels.compiled is not None:
        backends.insert(0, ("compiled", kernels.compiled))
    else:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<28}" + "".join(f"{n:>14}" for n, _ in backends) + "   speed-up")
    for name, fn in cases():
        times = [_best(lambda b=b: fn(b), args.repeat) for _, b in backends]
        line = f"{name:<28}" + "".join(f"{t * 1e3:>11.3f} ms" for t in times)
        if len(times) == 2:
            line += f"   {times[1] / times[0]:8.1f}x"
        print(line)


if __name__ == "__main__":
    main()
