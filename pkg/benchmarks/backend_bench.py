"""Compare the numba and numpy kernel backends on representative workloads.

Run:  python benchmarks/backend_bench.py
Both backends are imported directly (bypassing the BOWTRIAGE_BACKEND env
selection) so one process can time them side by side. Sizes mirror the
desk-scale benchmark corpus: ~1500 training rows, ~250 nonzeros per row.
"""

import time

import numpy as np

from bowtriage.kernels import _numpy as numpy_backend

try:
    from bowtriage.kernels import _numba as numba_backend
except ImportError:
    numba_backend = None
    print("numba not installed - numpy backend only")


def median_time(fn, *args, repeats=7):
    fn(*args)  # warmup (and JIT compile for numba)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def make_workloads(rng):
    n, f = 1500, 64
    x = np.ascontiguousarray(np.round(rng.uniform(0, 1, size=(n, f)), 2))
    y01 = (rng.random(n) < 0.5).astype(np.float64)
    target = rng.normal(size=n)
    thresholds = rng.uniform(0.2, 0.8, size=f)

    nnz_per_row = 250
    dim = 2**12
    indptr = np.arange(0, (n + 1) * nnz_per_row, nnz_per_row, dtype=np.int64)
    indices = np.concatenate(
        [np.sort(rng.choice(dim, size=nnz_per_row, replace=False)) for _ in range(n)]
    ).astype(np.int64)
    data = rng.uniform(0.01, 0.1, size=indices.size)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    q_idx = np.sort(rng.choice(dim, size=nnz_per_row, replace=False)).astype(np.int64)
    q_val = rng.uniform(0.01, 0.1, size=nnz_per_row)

    n_nodes = 255  # full binary tree of depth 7
    feature = rng.integers(0, f, size=n_nodes).astype(np.int64)
    feature[n_nodes // 2 :] = -1
    left = np.arange(1, n_nodes + 1, dtype=np.int64) * 2 - 1
    right = left + 1
    left[n_nodes // 2 :] = -1
    right[n_nodes // 2 :] = -1
    tree_thr = rng.uniform(0, 1, size=n_nodes)
    value = rng.uniform(0, 1, size=n_nodes)

    xs = np.ascontiguousarray(x[:100, :8])
    ys = y01[:100]

    return [
        ("best_split_gini(1500x64)", "best_split_gini", (x, y01, 1)),
        ("best_split_gini(100x8)", "best_split_gini", (xs, ys, 1)),
        ("best_split_mse(1500x64)", "best_split_mse", (x, target, 1)),
        ("eval_fixed_splits(1500x64)", "eval_fixed_splits_gini", (x, y01, thresholds, 1)),
        ("csr_dots(1500 rows)", "csr_dots", (indptr, indices, data, q_idx, q_val, dim)),
        ("svm_epochs(5 x 1500)", "svm_epochs", (indptr, indices, data, y, 1e-4, 5, dim)),
        ("tree_apply(1500 rows)", "tree_apply", (feature, tree_thr, left, right, value, x)),
    ]


def main():
    rng = np.random.default_rng(0)
    workloads = make_workloads(rng)
    header = f"{'workload':<28} {'numpy':>10} {'numba':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, fn_name, args in workloads:
        t_np = median_time(getattr(numpy_backend, fn_name), *args)
        if numba_backend is None:
            print(f"{label:<28} {t_np * 1e3:>8.2f}ms {'-':>10} {'-':>8}")
            continue
        t_nb = median_time(getattr(numba_backend, fn_name), *args)
        print(f"{label:<28} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
