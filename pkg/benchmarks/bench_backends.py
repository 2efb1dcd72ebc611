"""Compare the numba kernels against the pure-numpy fallbacks.

Runs every paired kernel on pipeline-realistic inputs, checks that the two
backends agree, and prints a timing table.  Invoke from the repo root:

    python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import time

import numpy as np

from numina._kernels import _numba, _numpy


def timeit(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def gray_fixture(gh, gw, blobs, seed=0):
    rng = np.random.default_rng(seed)
    v = np.zeros((gh, gw))
    for _ in range(blobs):
        r = int(rng.integers(1, gh - 2))
        c = int(rng.integers(1, gw - 2))
        v[r - 1 : r + 2, c - 1 : c + 2] = 1.0
    return v


def bench_mean_shift(repeat):
    gh = gw = 40
    v = gray_fixture(gh, gw, 6)
    w_int = float(np.hypot(gh, gw)) / 4.0
    rows, cols = np.meshgrid(np.arange(gh), np.arange(gw), indexing="ij")
    feats = np.ascontiguousarray(np.stack(
        [rows.ravel().astype(float), cols.ravel().astype(float),
         v.ravel() * w_int], axis=1))
    bw = gh / 6.0
    t_np, a = timeit(_numpy.mean_shift_modes, feats, bw, 100, 1e-3, repeat=repeat)
    t_nb, b = timeit(_numba.mean_shift_modes, feats, bw, 100, 1e-3, repeat=repeat)
    assert np.allclose(a, b, atol=1e-9)
    return f"mean_shift_modes ({gh * gw} pts)", t_np, t_nb


def bench_link_modes(repeat):
    rng = np.random.default_rng(1)
    modes = np.ascontiguousarray(rng.random((1600, 3)) * 40.0)
    t_np, a = timeit(_numpy.link_modes, modes, 3.3, repeat=repeat)
    t_nb, b = timeit(_numba.link_modes, modes, 3.3, repeat=repeat)
    assert a.max() == b.max()
    return "link_modes (1600 modes)", t_np, t_nb


def bench_dbscan(repeat):
    rng = np.random.default_rng(2)
    pts = np.ascontiguousarray(rng.random((800, 2)) * 40.0)
    t_np, a = timeit(_numpy.dbscan_labels, pts, 2.0, 3, repeat=repeat)
    t_nb, b = timeit(_numba.dbscan_labels, pts, 2.0, 3, repeat=repeat)
    assert (a >= 0).sum() == (b >= 0).sum()
    return "dbscan_labels (800 pts)", t_np, t_nb


def bench_label_components(repeat):
    rng = np.random.default_rng(3)
    mask = np.ascontiguousarray(rng.random((120, 200)) < 0.45)
    t_np, a = timeit(_numpy.label_components, mask, repeat=repeat)
    t_nb, b = timeit(_numba.label_components, mask, repeat=repeat)
    assert np.array_equal(a, b)
    return "label_components (120x200)", t_np, t_nb


def bench_best_placement(repeat):
    rng = np.random.default_rng(4)
    forbidden = np.ascontiguousarray(rng.random((30, 52)) < 0.15)
    offs = np.array([(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)],
                    dtype=np.int64)
    args = (forbidden, offs, 1, 28, 1, 50, 1, 14.5, 25.5, 10.0, 10.0, True, 8.0)
    t_np, a = timeit(_numpy.best_placement, *args, repeat=repeat)
    t_nb, b = timeit(_numba.best_placement, *args, repeat=repeat)
    assert a == b
    return "best_placement (30x52, stride 1)", t_np, t_nb


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    benches = [bench_mean_shift, bench_link_modes, bench_dbscan,
               bench_label_components, bench_best_placement]
    # trigger jit compilation outside the timed region
    print("warming numba kernels ...")
    for bench in benches:
        bench(1)

    rows = [bench(args.repeat) for bench in benches]
    width = max(len(r[0]) for r in rows)
    print(f"\n{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    print("-" * (width + 34))
    for name, t_np, t_nb in rows:
        print(f"{name:<{width}}  {t_np * 1e3:>8.2f}ms  {t_nb * 1e3:>8.2f}ms  "
              f"{t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
