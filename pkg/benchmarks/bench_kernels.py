"""Compiled kernels vs the NumPy fallback on the hot loops.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time per kernel for each backend and the
speedup. Exits quietly with a note when the extension is not built.
"""
import argparse
import timeit

import numpy as np

from pgconv import _kernels_py

try:
    from pgconv import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _cases(rng):
    A = rng.uniform(-1, 1, size=(5, 5))
    mu = np.full(5, 0.2)
    S, m, n = 3, 2, 2
    r = rng.uniform(0, 1, size=(S, m, n))
    P = rng.dirichlet(np.ones(S), size=(S, m, n))
    alphas = np.full(2000, 1e-3)
    Pm = rng.dirichlet(np.ones(20), size=(20, 4))
    rm = rng.uniform(0, 1, size=(20, 4))

    def ac_args():
        mu_s = np.full((S, m), 1 / m)
        nu_s = np.full((S, n), 1 / n)
        return (r, P, 0.8, np.zeros((S, m, n)), mu_s, nu_s, mu_s.copy(), nu_s.copy(), np.zeros(S),
                0, 0.01, 0.1, alphas, 100)

    return {
        "omwu_trajectory (5x5, 5000 steps)":
            lambda k: k.omwu_trajectory(A, mu, mu, mu, mu, 0.2, 0.1, 0, 5000),
        "omwu_solve (5x5, tau=0.05, tol=1e-10)":
            lambda k: k.omwu_solve(A, mu, mu, mu, mu, 0.25, 0.05, 0, 1e-10, 10**6, 10),
        "actor_critic_loop (3 states, 2000 iters)":
            lambda k: k.actor_critic_loop(*ac_args()),
        "value_iteration (20x4, soft, tol=1e-10)":
            lambda k: k.value_iteration(Pm, rm, 0.95, 1e-10, 0.1, 10**6),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels_c is None:
        print("compiled extension not built; run `python setup.py build_ext --inplace` first")
        return
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':44s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases.items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: fn(_kernels_c), number=1, repeat=args.repeat))
        print(f"{name:44s} {1e3 * t_py:12.2f} {1e3 * t_c:12.2f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
