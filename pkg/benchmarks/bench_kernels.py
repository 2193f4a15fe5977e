"""Compiled vs numpy kernel timings.

    python benchmarks/bench_kernels.py [--n 32] [--repeat 3]

Prints one row per kernel with the best wall time of each backend, the
speed-up and the largest relative difference between the two results.
"""

import argparse
import math
import time

import numpy as np

from cascade_scope import _kernels
from cascade_scope.cascade import coherence_stencil, direction_field
from cascade_scope.fields import make_grid, sample_analytic


def best_time(fn, repeat):
    best, out = math.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(n):
    g = make_grid((0.0,) * 3, (2 * math.pi,) * 3, (n,) * 3, (True,) * 3)
    w = np.asarray(sample_analytic("random_multiscale", {"seed": 1, "field": "vorticity"}, g).values)
    rng = np.random.default_rng(0)
    centers = rng.uniform(1.0, 5.0, (16, 3))
    R = 6 * g.spacing[0]
    scalar = np.sum(w * w, axis=0)
    xi, valid = direction_field(w, 1e-8 * float(np.max(np.sqrt(scalar))))
    offs, den = coherence_stencil(g, 3 * g.spacing[0], 0.5)
    xi4 = _kernels.as4d(xi, g)
    per = np.ones(3, dtype=np.int32)
    X = rng.uniform(-1, 1, (1500, 3))
    Y = rng.uniform(-1, 1, (3000, 3))
    unit = lambda a: a / np.linalg.norm(a, axis=1, keepdims=True)
    xX, xY = unit(rng.standard_normal(X.shape)), unit(rng.standard_normal(Y.shape))
    return {
        "ball_sums psi^1/2": lambda be: _kernels.ball_sums(scalar, g, centers, R, 4, 0.5, 0, backend=be),
        "ball_sums lap psi": lambda be: _kernels.ball_sums(scalar, g, centers, R, 4, 1.0, 1, backend=be),
        "ball_sums grad psi": lambda be: _kernels.ball_sums(w, g, centers, R, 4, 1.0, 2, backend=be),
        f"coherence_sup ({len(offs)} offsets)": lambda be: _kernels.coherence_sup(
            xi4, valid.reshape(g.shape), offs, den, per, backend=be),
        "pairs_sup 1500x3000": lambda be: np.array(_kernels.pairs_sup(X, xX, Y, xY, 0.5, backend=be)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=32, help="grid points per axis")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = _kernels.available_backends()
    if "cython" not in backends:
        raise SystemExit("compiled kernels are not built; run `python setup.py build_ext --inplace`")
    print(f"{'kernel':32s} {'cython s':>10s} {'numpy s':>10s} {'speed-up':>9s} {'max rel diff':>13s}")
    for name, fn in cases(args.n).items():
        tc, a = best_time(lambda: fn("cython"), args.repeat)
        tp, b = best_time(lambda: fn("python"), args.repeat)
        scale = max(float(np.max(np.abs(b))), 1e-300)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) / scale
        print(f"{name:32s} {tc:10.4f} {tp:10.4f} {tp / tc:9.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
