"""Index sanity experiments: self-queries, second-neighbor and out-of-domain distances."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import RowOutOfRange
from .index import FlatIndex, Neighbor
from .text_embed import normalize_text

ZERO_TOL = 1e-6
DEFAULT_BIN_WIDTH = 0.05
MAX_DISTANCE = 2.0


@dataclass
class Histogram:
    width: float = DEFAULT_BIN_WIDTH
    counts: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValueError("bin width must be positive")
        if not self.counts:
            self.counts = [0] * max(1, math.ceil(MAX_DISTANCE / self.width - 1e-9))

    @property
    def total(self) -> int:
        return sum(self.counts)

    def add(self, distance: float) -> None:
        i = int(distance // self.width)
        self.counts[min(max(i, 0), len(self.counts) - 1)] += 1

    def rows(self) -> list[tuple[float, float, int]]:
        last = len(self.counts) - 1
        out = []
        for i, c in enumerate(self.counts):
            end = MAX_DISTANCE if i == last else (i + 1) * self.width
            out.append((round(i * self.width, 10), round(end, 10), c))
        return out

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_start", "bin_end", "count"])
            writer.writerows(self.rows())


@dataclass
class SelfQueryReport:
    checked: int
    violations: list[tuple[int, Neighbor]]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class NeighborDistribution:
    histogram: Histogram
    queries: int
    skips: int


@dataclass
class OutOfDomainReport:
    first: Histogram
    second: Histogram
    queries: int
    skips: int  # queries without a second neighbor
    fraction_below_tau: float
    first_distances: list[float]

    def summary(self) -> dict:
        return {
            "queries": self.queries,
            "skips": self.skips,
            "fraction_below_tau": self.fraction_below_tau,
        }


def _rows_vectors(index: FlatIndex, row_ids: Sequence[int]) -> np.ndarray:
    ids = np.asarray(list(row_ids), dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= index.count):
        bad = ids[(ids < 0) | (ids >= index.count)][0]
        raise RowOutOfRange(f"row {int(bad)} not in [0, {index.count})")
    return index.vectors[ids] if ids.size else np.empty((0, index.dim), dtype=np.float32)


def self_query_check(index: FlatIndex, sample_row_ids: Sequence[int]) -> SelfQueryReport:
    """Query each sampled row with its own vector; the first neighbor must sit at ~0.

    A first neighbor other than the row itself is fine when it is a
    duplicate, i.e. also at distance ~0.
    """
    queries = _rows_vectors(index, sample_row_ids)
    found_all = index.knn_search_batch(queries, 2) if len(queries) else []
    violations = []
    for row_id, found in zip(sample_row_ids, found_all):
        first = found[0]
        if first.distance > ZERO_TOL:
            violations.append((int(row_id), first))
    return SelfQueryReport(len(queries), violations)


def _first_beyond_zero(index: FlatIndex, query: np.ndarray, found: list[Neighbor]) -> Neighbor | None:
    k = len(found)
    while True:
        for nb in found:
            if nb.distance > ZERO_TOL:
                return nb
        if k >= index.count:
            return None
        k = min(2 * k, index.count)
        found = index.knn_search(query, k)


def second_neighbor_distribution(
    index: FlatIndex, sample_row_ids: Sequence[int], width: float = DEFAULT_BIN_WIDTH
) -> NeighborDistribution:
    """Histogram of the nearest distinct neighbor of each sampled row.

    Rows whose every neighbor is an exact duplicate are counted as skips.
    """
    hist = Histogram(width)
    queries = _rows_vectors(index, sample_row_ids)
    skips = 0
    if len(queries):
        for q, found in zip(queries, index.knn_search_batch(queries, 2)):
            nb = _first_beyond_zero(index, q, found)
            if nb is None:
                skips += 1
            else:
                hist.add(nb.distance)
    return NeighborDistribution(hist, len(queries), skips)


def out_of_domain_check(
    index: FlatIndex,
    corpus: Sequence[str],
    embed,
    tau: float,
    width: float = DEFAULT_BIN_WIDTH,
) -> OutOfDomainReport:
    """Distances from foreign-domain sentences to their two nearest indexed rows.

    The caller is responsible for ``corpus`` actually coming from another
    domain. ``embed`` is a text-to-vector callable or an object with a batch
    ``embed`` method.
    """
    if not corpus:
        raise ValueError("out-of-domain corpus is empty")
    texts = [normalize_text(t) for t in corpus]
    batch = getattr(embed, "embed", None)
    vectors = list(batch(texts)) if batch is not None else [embed(t) for t in texts]
    first, second = Histogram(width), Histogram(width)
    firsts: list[float] = []
    skips = 0
    for found in index.knn_search_batch(np.stack(vectors), 2):
        if not found:
            skips += 1
            continue
        firsts.append(found[0].distance)
        first.add(found[0].distance)
        if len(found) > 1:
            second.add(found[1].distance)
        else:
            skips += 1
    below = sum(1 for d in firsts if d <= tau)
    return OutOfDomainReport(first, second, len(texts), skips, below / len(texts), firsts)


@dataclass
class AlignmentReport:
    checked: int
    violations: list[tuple[int, float]]


def alignment_check(index: FlatIndex, catalog, embed, row_ids: Sequence[int]) -> AlignmentReport:
    """Re-embed catalog rows and confirm each lands exactly on its index row."""
    row_ids = list(row_ids)
    _rows_vectors(index, row_ids)
    texts = [normalize_text(catalog.get(r).description) for r in row_ids]
    if not texts:
        return AlignmentReport(0, [])
    batch = getattr(embed, "embed", None)
    vectors = list(batch(texts)) if batch is not None else [embed(t) for t in texts]
    violations = []
    for r, vec in zip(row_ids, vectors):
        d = float(index.exact_distances(vec, np.array([r]))[0])
        if d > ZERO_TOL:
            violations.append((r, d))
    return AlignmentReport(len(row_ids), violations)
