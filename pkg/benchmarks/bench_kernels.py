"""Time the numba and numpy flavours of each hot kernel on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Both flavours are imported side by side from ``selgen._kernels.FLAVOURS``,
so the environment flag does not matter here.  Numba compilation happens in
a warm-up call and is excluded from the timings.
"""

import argparse
import time

import numpy as np

from selgen import _kernels


def best_of(fn, args, repeat):
    fn(*args)  # warm-up (JIT compile / cache load)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(scale: float):
    rng = np.random.default_rng(0)
    s = lambda n: max(1, int(n * scale))  # noqa: E731

    d = 256
    a = rng.normal(size=(d, d))
    spd = a @ a.T + d * np.eye(d)
    yield "cholesky", f"d={d}", (spd, _kernels.pivot_tolerance(spd))

    d = 64
    lower = np.linalg.cholesky(spd[:d, :d])
    yield "mahalanobis_rows", f"N={s(20000)} d={d}", (rng.normal(size=(s(20000), d)), rng.normal(size=d), lower)

    ref = rng.normal(size=(s(4000), 32))
    ref /= np.linalg.norm(ref, axis=1, keepdims=True)
    q = rng.normal(size=(s(500), 32))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    yield "knn_kth", f"N={ref.shape[0]} Q={q.shape[0]} d=32 k=100", (ref, q, 100)

    n = s(3000)
    yield "kendall_counts", f"n={n}", (rng.integers(0, 5, n).astype(float), rng.normal(size=n))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply problem sizes")
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<18} {'size':<28} {'numba (ms)':>11} {'numpy (ms)':>11} {'speedup':>8}")
    for name, size, inputs in cases(args.scale):
        nb, np_ = _kernels.FLAVOURS[name]
        t_nb = best_of(nb, inputs, args.repeat)
        t_np = best_of(np_, inputs, args.repeat)
        print(f"{name:<18} {size:<28} {t_nb * 1e3:11.2f} {t_np * 1e3:11.2f} {t_np / t_nb:7.2f}x")


if __name__ == "__main__":
    main()
