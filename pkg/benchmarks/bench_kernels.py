"""Time the numba and pure-numpy paths of the hot kernels side by side.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both implementations are imported directly, so the DIFFGC_DISABLE_NUMBA
flag does not matter here. The first numba call (compilation or cache
load) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from diffgc import _kernels


def _best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def lasso_case(m, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((m, 4 * m))
    gram = np.ascontiguousarray(x @ x.T / (4 * m))
    w = gram @ np.where(rng.random(m) < 0.2, rng.standard_normal(m), 0.0) + 0.1 * rng.standard_normal(m)
    lam = 0.05 * np.max(np.abs(w))
    return gram, w, lam


def bench_lasso(m, repeat):
    gram, w, lam = lasso_case(m)

    def run(kernel):
        beta = np.zeros(m)
        kernel(gram, w, lam, beta, 1e-10, 10_000)
        return beta

    run(_kernels.cd_lasso_numba)  # warm-up
    b_numba, b_numpy = run(_kernels.cd_lasso_numba), run(_kernels.cd_lasso_numpy)
    t_numba = _best_of(lambda: run(_kernels.cd_lasso_numba), repeat)
    t_numpy = _best_of(lambda: run(_kernels.cd_lasso_numpy), repeat)
    return t_numba, t_numpy, float(np.max(np.abs(b_numba - b_numpy)))


def bench_var(d, steps, repeat):
    rng = np.random.default_rng(1)
    a = rng.standard_normal((2, d, d))
    a *= 0.4 / np.abs(np.linalg.eigvals(a[0])).max()
    a[1] *= 0.3
    noise = rng.standard_normal((steps, d))
    _kernels.var_recursion_numba(a, noise)  # warm-up
    diff = float(np.max(np.abs(_kernels.var_recursion_numba(a, noise) - _kernels.var_recursion_numpy(a, noise))))
    t_numba = _best_of(lambda: _kernels.var_recursion_numba(a, noise), repeat)
    t_numpy = _best_of(lambda: _kernels.var_recursion_numpy(a, noise), repeat)
    return t_numba, t_numpy, diff


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba is not importable; the numba column times the plain Python loop")

    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}{'max |diff|':>13}")
    rows = [(f"cd_lasso m={m}", bench_lasso(m, args.repeat)) for m in (20, 40, 100)]
    rows += [(f"var_recursion d={d} T={t}", bench_var(d, t, args.repeat))
             for d, t in ((20, 600), (50, 1200))]
    for name, (tn, tp, diff) in rows:
        print(f"{name:<28}{1e3 * tn:>12.3f}{1e3 * tp:>12.3f}{tp / tn:>10.1f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
