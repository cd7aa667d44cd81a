"""Time the njit kernels against their numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first call of each njit kernel (compilation or cache load) is excluded.
A final row times one R-IRKA run to show how small the kernel share is next
to the sparse factorizations.
"""

import argparse
import cProfile
import pstats
import timeit

import numpy as np

from h2mor import _kernels
from h2mor._accel import NUMBA_ENABLED


def _orth_case(rng, n, k0, m):
    Q0, _ = np.linalg.qr(rng.standard_normal((n, k0)))
    M = rng.standard_normal((n, m))

    def make():
        Q = np.zeros((n, k0 + m))
        Q[:, :k0] = Q0
        return Q, k0, M, 1e-10

    return (f"gram_schmidt n={n} k={k0}+{m}", _kernels._orth_into_numba, _kernels._orth_into_numpy, make)


def _cases(rng):
    T = np.triu(rng.standard_normal((200, 200))) + 20 * np.eye(200)
    S = np.triu(rng.standard_normal((40, 40))) + 20 * np.eye(40)
    R = rng.standard_normal((200, 40))
    W = rng.standard_normal((7, 1, 400, 400))
    return [
        _orth_case(rng, 20000, 40, 11),
        _orth_case(rng, 2500, 22, 11),
        _orth_case(rng, 66, 0, 11),
        ("tri_sylvester 200x40", _kernels._tri_sylvester_numba, _kernels._tri_sylvester_numpy,
         lambda: (T, S, R)),
        ("stencil 400x400", _kernels._stencil_triplets_numba, _kernels._stencil_triplets_numpy,
         lambda: (W, 400, 400, 1)),
    ]


def bench(repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, f_nb, f_np, make in _cases(rng):
        f_nb(*make())  # compile / load from cache
        t_nb = min(timeit.repeat(lambda: f_nb(*make()), number=1, repeat=repeat))
        t_np = min(timeit.repeat(lambda: f_np(*make()), number=1, repeat=repeat))
        print(f"{name:32s} {1e3 * t_nb:11.2f} {1e3 * t_np:11.2f} {t_np / t_nb:8.2f}")


def profile_rirka():
    from h2mor.problems import gen_elliptic
    from h2mor.rirka import RirkaConfig, rirka

    sys_ = gen_elliptic("L10000", 50)
    prof = cProfile.Profile()
    prof.enable()
    rirka(sys_, RirkaConfig(11))
    prof.disable()
    stats = pstats.Stats(prof)
    total = stats.total_tt
    by_name = {}
    for (file, _, func), (_, _, _, ct, _) in stats.stats.items():
        by_name[func] = max(by_name.get(func, 0.0), ct)
    lu = by_name.get("factor_shifted", 0.0) + by_name.get("_apply", 0.0)
    orth = by_name.get("orth_into", 0.0)
    print(f"\nR-IRKA on L10000@50 (r=11): total {total:.2f} s, "
          f"sparse LU factor+solve {lu:.2f} s, Gram-Schmidt {orth:.2f} s")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--no-profile", action="store_true")
    args = parser.parse_args()
    if not NUMBA_ENABLED:
        raise SystemExit("numba is disabled (H2MOR_DISABLE_NUMBA); nothing to compare")
    bench(args.repeat)
    if not args.no_profile:
        profile_rirka()


if __name__ == "__main__":
    main()
