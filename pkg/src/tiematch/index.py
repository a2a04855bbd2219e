"""Exact flat L2 index with k-NN and range search.

Searches run in two passes. A float32 matrix product gives approximate
squared distances for every row. Rows that could still be in the answer,
given a rigorous bound on the float32 rounding error, are then rescored
exactly as ``sqrt(sum((x - q)**2))`` in float64. The final ranking only ever
uses the exact distances, so duplicates score exactly 0.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, DimensionMismatch, NormViolation, TruncatedFile, UnsupportedVersion

MAGIC = b"FLX1"
VERSION = 1
HEADER = struct.Struct("<4sIIQ")
NORM_TOL = 1e-5
_EPS32 = float(np.finfo(np.float32).eps)
_QUERY_BLOCK = 64


@dataclass(frozen=True)
class Neighbor:
    row_id: int
    distance: float


def _as_matrix(vectors, dim: int | None) -> np.ndarray:
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        mat = vectors
    else:
        rows = list(vectors)
        if not rows:
            return np.empty((0, dim or 0), dtype=np.float32)
        lengths = {np.shape(r)[0] if np.ndim(r) == 1 else -1 for r in rows}
        if len(lengths) != 1 or -1 in lengths:
            raise DimensionMismatch(f"vectors have inconsistent dims {sorted(lengths)}")
        mat = np.stack([np.asarray(r) for r in rows])
    mat = np.ascontiguousarray(mat, dtype=np.float32)
    if dim is not None and mat.shape[0] and mat.shape[1] != dim:
        raise DimensionMismatch(f"expected dim {dim}, got {mat.shape[1]}")
    if mat.shape[0]:
        norms = np.sqrt(np.einsum("ij,ij->i", mat, mat, dtype=np.float64))
        bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
        if bad.size:
            raise NormViolation(f"row {int(bad[0])} has norm {norms[bad[0]]:.8f}")
    return mat


class FlatIndex:
    """Dense row-major store of unit vectors; row ids are insertion positions."""

    def __init__(self, dim: int) -> None:
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._vectors = np.empty((0, dim), dtype=np.float32)
        self._sqnorms = np.empty(0, dtype=np.float64)

    @property
    def count(self) -> int:
        return self._vectors.shape[0]

    def __len__(self) -> int:
        return self.count

    @property
    def vectors(self) -> np.ndarray:
        view = self._vectors.view()
        view.flags.writeable = False
        return view

    def add(self, vectors) -> "FlatIndex":
        mat = _as_matrix(vectors, self.dim)
        if mat.shape[0] == 0:
            return self
        self._vectors = np.concatenate([self._vectors, mat])
        self._sqnorms = np.concatenate(
            [self._sqnorms, np.einsum("ij,ij->i", mat, mat, dtype=np.float64)]
        )
        return self

    def _check_query(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float32)
        if q.ndim != 1 or q.shape[0] != self.dim:
            raise DimensionMismatch(f"query shape {q.shape} does not match dim {self.dim}")
        return q

    def _slack(self, qsq: float) -> float:
        # Worst-case error of a float32 dot product of length dim, plus the
        # rounding of the float64 norms; doubled for margin.
        scale = np.sqrt(qsq * float(self._sqnorms.max(initial=1.0))) + qsq + 1.0
        return 4.0 * (self.dim + 2) * _EPS32 * scale

    def _approx_sq(self, queries: np.ndarray) -> np.ndarray:
        """Approximate squared distances, shape (n_queries, count)."""
        dots = queries @ self._vectors.T
        qsq = np.einsum("ij,ij->i", queries, queries, dtype=np.float64)
        return qsq[:, None] + self._sqnorms[None, :] - 2.0 * dots

    def exact_distances(self, query, rows: np.ndarray | None = None) -> np.ndarray:
        q = self._check_query(query).astype(np.float64)
        mat = self._vectors if rows is None else self._vectors[rows]
        diff = mat.astype(np.float64) - q
        return np.sqrt(np.maximum((diff * diff).sum(axis=1), 0.0))

    def _rank(self, q: np.ndarray, rows: np.ndarray, limit: int | None, radius: float | None):
        dist = self.exact_distances(q, rows)
        if radius is not None:
            keep = dist <= radius
            rows, dist = rows[keep], dist[keep]
        order = np.lexsort((rows, dist))
        if limit is not None:
            order = order[:limit]
        return [Neighbor(int(rows[i]), float(dist[i])) for i in order]

    def _knn_rows(self, approx: np.ndarray, k: int, slack: float) -> np.ndarray:
        if k >= approx.shape[0]:
            return np.arange(approx.shape[0])
        kth = np.partition(approx, k - 1)[k - 1]
        return np.flatnonzero(approx <= kth + slack)

    def knn_search(self, query, k: int) -> list[Neighbor]:
        """The ``min(k, count)`` nearest rows, ordered by (distance, row_id)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        q = self._check_query(query)
        if self.count == 0:
            return []
        approx = self._approx_sq(q[None, :])[0]
        rows = self._knn_rows(approx, k, self._slack(float(np.dot(q, q))))
        return self._rank(q, rows, k, None)

    def range_search(self, query, radius: float) -> list[Neighbor]:
        """All rows with distance <= radius, ordered by (distance, row_id)."""
        if radius < 0:
            raise ValueError("radius must be non-negative")
        q = self._check_query(query)
        if self.count == 0:
            return []
        approx = self._approx_sq(q[None, :])[0]
        rows = np.flatnonzero(approx <= radius * radius + self._slack(float(np.dot(q, q))))
        return self._rank(q, rows, None, radius)

    def knn_search_batch(self, queries, k: int) -> list[list[Neighbor]]:
        """Same results as calling :meth:`knn_search` per query, using blocked GEMM."""
        if k < 1:
            raise ValueError("k must be >= 1")
        qs = np.asarray(queries, dtype=np.float32)
        if qs.ndim != 2 or qs.shape[1] != self.dim:
            raise DimensionMismatch(f"queries shape {qs.shape} does not match dim {self.dim}")
        if self.count == 0:
            return [[] for _ in range(qs.shape[0])]
        out: list[list[Neighbor]] = []
        for start in range(0, qs.shape[0], _QUERY_BLOCK):
            block = qs[start : start + _QUERY_BLOCK]
            approx = self._approx_sq(block)
            for q, row_approx in zip(block, approx):
                rows = self._knn_rows(row_approx, k, self._slack(float(np.dot(q, q))))
                out.append(self._rank(q, rows, k, None))
        return out


def build(vectors, dim: int | None = None) -> FlatIndex:
    """Build an index from a sequence (or 2-D array) of unit vectors."""
    mat = _as_matrix(vectors, dim)
    if mat.shape[1] == 0 and dim is None:
        raise ValueError("dim is required to build an empty index")
    index = FlatIndex(dim if dim is not None else mat.shape[1])
    return index.add(mat)


def knn_search(index: FlatIndex, query, k: int) -> list[Neighbor]:
    return index.knn_search(query, k)


def range_search(index: FlatIndex, query, radius: float) -> list[Neighbor]:
    return index.range_search(query, radius)


def save(index: FlatIndex, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, index.dim, index.count))
        fh.write(index._vectors.astype("<f4", copy=False).tobytes(order="C"))


def load(path: str | os.PathLike) -> FlatIndex:
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) < HEADER.size:
            if head[:4] != MAGIC[: len(head[:4])]:
                raise BadMagic(f"{path}: not an index file")
            raise TruncatedFile(f"{path}: header is {len(head)} bytes")
        magic, version, dim, count = HEADER.unpack(head)
        if magic != MAGIC:
            raise BadMagic(f"{path}: magic {magic!r}")
        if version != VERSION:
            raise UnsupportedVersion(f"{path}: format version {version}")
        payload = fh.read()
    expected = count * dim * 4
    if len(payload) != expected:
        raise TruncatedFile(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    mat = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(count, dim)
    index = FlatIndex(dim)
    if count:
        index._vectors = np.ascontiguousarray(mat)
        index._sqnorms = np.einsum("ij,ij->i", mat, mat, dtype=np.float64)
    return index
