"""Threshold-plus-epsilon matching of items against an indexed catalog.

For an item without a catalog identifier: embed its description, find the
distance ``d1`` to its nearest indexed neighbor, and if ``d1 <= tau`` pull
every row within ``d1 + epsilon`` (the tie list). Items beyond ``tau`` are
flagged unique. Items that carry an identifier skip the search entirely.
"""

from __future__ import annotations

import enum
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import BatchItemError, EmptyText, ParseError, TieMatchError, ZeroVector
from .index import FlatIndex, Neighbor
from .store import Catalog, ItemRecord
from .text_embed import normalize_text

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.4
DEFAULT_EPSILON = 0.00001

EmbedFn = Callable[[str], np.ndarray]


@dataclass(frozen=True)
class MatchParams:
    tau: float = DEFAULT_TAU
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        # tau == 0 is allowed: only exact duplicates then match
        if not 0 <= self.tau <= 2:
            raise ValueError(f"tau must be in [0, 2], got {self.tau}")
        if self.epsilon <= 0 or (self.tau > 0 and self.epsilon >= self.tau / 100):
            raise ValueError(f"epsilon must be in (0, tau/100), got {self.epsilon}")


class Status(str, enum.Enum):
    IDENTIFIED = "identified"
    MATCHED = "matched"
    UNIQUE = "unique"
    ERROR = "error"


@dataclass
class PriceStats:
    n: int
    min: float | None = None
    max: float | None = None
    mean: float | None = None
    query_price: float | None = None
    max_abs_diff: float | None = None

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "query_price": self.query_price,
            "max_abs_diff": self.max_abs_diff,
        }


@dataclass
class MatchResult:
    query_item_id: str
    status: Status
    first_neighbor: Neighbor | None = None
    tie_list: list[Neighbor] = field(default_factory=list)
    tie_items: list[ItemRecord] = field(default_factory=list)
    price_stats: PriceStats | None = None
    error: str | None = None

    def to_json(self) -> dict:
        out = {
            "item_id": self.query_item_id,
            "status": self.status.value,
            "first_distance": None if self.first_neighbor is None else self.first_neighbor.distance,
            "ties": [
                {
                    "row_id": nb.row_id,
                    "item_id": rec.item_id,
                    "identifier": rec.identifier,
                    "distance": nb.distance,
                    "price": rec.price,
                }
                for nb, rec in zip(self.tie_list, self.tie_items)
            ],
            "price_stats": None if self.price_stats is None else self.price_stats.to_json(),
        }
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class MatchReport:
    total: int = 0
    identified: int = 0
    searched: int = 0
    matched: int = 0
    unique: int = 0
    errors: int = 0
    match_rate: float = 0.0

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "identified": self.identified,
            "searched": self.searched,
            "matched": self.matched,
            "unique": self.unique,
            "errors": self.errors,
            "match_rate": self.match_rate,
        }


def price_variation(query: ItemRecord, ties: Sequence[ItemRecord]) -> PriceStats:
    prices = [t.price for t in ties if t.price is not None]
    if not prices:
        return PriceStats(n=0, query_price=query.price)
    stats = PriceStats(
        n=len(prices),
        min=min(prices),
        max=max(prices),
        mean=sum(prices) / len(prices),
        query_price=query.price,
    )
    if query.price is not None:
        stats.max_abs_diff = max(abs(query.price - p) for p in prices)
    return stats


def _match_vector(
    item: ItemRecord,
    vec: np.ndarray,
    index: FlatIndex,
    catalog: Catalog,
    params: MatchParams,
) -> MatchResult:
    nearest = index.knn_search(vec, 1)
    if not nearest or nearest[0].distance > params.tau:
        return MatchResult(item.item_id, Status.UNIQUE, nearest[0] if nearest else None)
    first = nearest[0]
    ties = index.range_search(vec, first.distance + params.epsilon)
    records = catalog.get_many(nb.row_id for nb in ties)
    return MatchResult(
        item.item_id,
        Status.MATCHED,
        first,
        ties,
        records,
        price_variation(item, records),
    )


def match_item(
    item: ItemRecord,
    index: FlatIndex,
    catalog: Catalog,
    embed: EmbedFn,
    params: MatchParams = MatchParams(),
) -> MatchResult:
    if item.has_identifier:
        return MatchResult(item.item_id, Status.IDENTIFIED)
    vec = embed(normalize_text(item.description))
    return _match_vector(item, vec, index, catalog, params)


def summarize(results: Iterable[MatchResult]) -> MatchReport:
    rep = MatchReport()
    for r in results:
        rep.total += 1
        if r.status is Status.IDENTIFIED:
            rep.identified += 1
        elif r.status is Status.MATCHED:
            rep.matched += 1
        elif r.status is Status.UNIQUE:
            rep.unique += 1
        else:
            rep.errors += 1
    rep.searched = rep.matched + rep.unique
    rep.match_rate = rep.matched / rep.searched if rep.searched else 0.0
    return rep


def _embed_pending(embedder, texts: list[str]) -> list[np.ndarray | Exception]:
    """Embed in one batch call when possible, falling back to one call per text."""
    if not texts:
        return []
    batch = getattr(embedder, "embed", None)
    if batch is not None:
        try:
            return list(batch(texts))
        except BatchItemError as exc:
            logger.debug("batch embed failed (%s); retrying item by item", exc)
    single = embedder if callable(embedder) else (lambda t: batch([t])[0])
    out: list[np.ndarray | Exception] = []
    for text in texts:
        try:
            out.append(single(text))
        except (EmptyText, ZeroVector, BatchItemError) as exc:
            out.append(exc)
    return out


def match_batch(
    items: Sequence[ItemRecord],
    index: FlatIndex,
    catalog: Catalog,
    embed,
    params: MatchParams = MatchParams(),
) -> tuple[list[MatchResult], MatchReport]:
    """Match every item against a fixed index; results keep input order.

    ``embed`` is either a text-to-vector callable or an object exposing a
    batch ``embed(texts)`` method. Per-item failures become ``error``
    results and never abort the batch. The index is never modified.
    """
    results: list[MatchResult | None] = [None] * len(items)
    pending: list[tuple[int, str]] = []
    for pos, item in enumerate(items):
        if item.has_identifier:
            results[pos] = MatchResult(item.item_id, Status.IDENTIFIED)
            continue
        try:
            pending.append((pos, normalize_text(item.description)))
        except EmptyText as exc:
            results[pos] = MatchResult(item.item_id, Status.ERROR, error=str(exc))

    vectors = _embed_pending(embed, [text for _, text in pending])
    for (pos, _), vec in zip(pending, vectors):
        item = items[pos]
        if isinstance(vec, Exception):
            results[pos] = MatchResult(item.item_id, Status.ERROR, error=str(vec))
            continue
        try:
            results[pos] = _match_vector(item, vec, index, catalog, params)
        except TieMatchError as exc:
            results[pos] = MatchResult(item.item_id, Status.ERROR, error=str(exc))
    final = [r for r in results if r is not None]
    return final, summarize(final)


def write_results(path: str | os.PathLike, results: Iterable[MatchResult]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False))
            fh.write("\n")


def report_from_jsonl(path: str | os.PathLike) -> MatchReport:
    """Recompute a report from a results JSONL file; raises ParseError on bad lines."""
    statuses = {s.value: s for s in Status}
    results = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or obj.get("status") not in statuses:
                raise ParseError(lineno, "missing or unknown 'status'")
            results.append(MatchResult(str(obj.get("item_id")), statuses[obj["status"]]))
    return summarize(results)
