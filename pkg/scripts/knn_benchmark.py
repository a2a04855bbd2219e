"""Latency of exact k-NN over random unit vectors."""

import argparse
import time

import numpy as np

from tiematch import index as flat


def unit_rows(n: int, dim: int, seed: int, chunk: int = 20_000) -> np.ndarray:
    rng = np.random.default_rng(seed)
    out = np.empty((n, dim), dtype=np.float32)
    for lo in range(0, n, chunk):
        x = rng.standard_normal((min(chunk, n - lo), dim)).astype(np.float64)
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        out[lo : lo + len(x)] = x
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=300_000)
    ap.add_argument("--dim", type=int, default=512)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--single", type=int, default=20, help="number of timed single queries")
    ap.add_argument("--batch", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    idx = flat.build(unit_rows(args.n, args.dim, args.seed))
    print(f"built {idx.count} x {idx.dim} in {time.perf_counter() - t0:.1f}s")
    queries = unit_rows(max(args.batch, args.single), args.dim, args.seed + 1)

    idx.knn_search(queries[0], args.k)
    times = []
    for q in queries[: args.single]:
        t0 = time.perf_counter()
        idx.knn_search(q, args.k)
        times.append(time.perf_counter() - t0)
    ms = np.array(times) * 1000
    print(f"single query: median {np.median(ms):.1f} ms, p95 {np.percentile(ms, 95):.1f} ms")

    t0 = time.perf_counter()
    idx.knn_search_batch(queries[: args.batch], args.k)
    print(f"batch of {args.batch}: {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
