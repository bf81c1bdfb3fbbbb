"""Timing of the compiled kernel loops against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--pairs 200] [--repeat 3]

Both backends integrate the same kernels to the same tolerance; the table
reports seconds per call, the speed-up, and the largest difference between
the two results.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from gauss_sing import _backend
from gauss_sing.kernels import KIND_CODES, KernelSpec
from gauss_sing.operators import GaussianBump


def _best_time(fn, repeat: int) -> tuple[float, object]:
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(pairs: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    for beta, kind in [((1,), "alt"), ((2,), "general"), ((1, 0), "alt"), ((1, 1), "k1"), ((2, 0), "alt")]:
        spec = KernelSpec.from_hermite(beta)
        d = spec.dim
        X = rng.normal(scale=0.7, size=(pairs, d))
        Z = rng.normal(scale=0.5, size=(pairs, d))
        yield f"kernel {kind} H{beta}", spec, ("kernel", kind, X, Z)
    for beta in [(1,), (1, 0)]:
        spec = KernelSpec.from_hermite(beta)
        d = spec.dim
        X = rng.normal(scale=0.7, size=(pairs, d))
        bump = GaussianBump.normalized(np.full(d, 0.3), 0.25)
        yield f"bump alt H{beta}", spec, ("bump", "alt", X, bump)


def run_case(backend, spec: KernelSpec, job, tol=(1e-13, 1e-10, 400)):
    what, kind, X, arg = job
    idx, coef = spec.hermite.as_arrays()
    kc, oc = KIND_CODES[kind]
    idx, coef = np.ascontiguousarray(idx), np.ascontiguousarray(coef)
    if what == "kernel":
        return backend.kernel_batch(kc, oc, spec.m, X, arg, idx, coef, *tol)[0]
    ghx, ghw = np.polynomial.hermite.hermgauss(spec.hermite.degree // 2 + 1)
    ghw = ghw / np.sqrt(np.pi)
    return backend.bump_batch(kc, oc, spec.m, X, arg.center, arg.sigma, idx, coef, ghx, ghw, *tol)[0]


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _backend.compiled_backend is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'case':<24}{'compiled [s]':>14}{'python [s]':>14}{'speed-up':>10}{'max diff':>12}")
    for name, spec, job in cases(args.pairs):
        tc, vc = _best_time(lambda: run_case(_backend.compiled_backend, spec, job), args.repeat)
        tp, vp = _best_time(lambda: run_case(_backend.python_backend, spec, job), 1)
        diff = float(np.max(np.abs(vc - vp) / np.maximum(1.0, np.abs(vc))))
        print(f"{name:<24}{tc:>14.4f}{tp:>14.4f}{tp / tc:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
