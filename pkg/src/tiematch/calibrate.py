"""Threshold calibration from human-labelled candidate pairs.

The loop is: sample unidentified items, propose their k nearest catalog
rows on a CSV worksheet, have someone fill in ``same``/``different``, then
pick the distance cut that best separates the two labels.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DegenerateLabels, NotEnoughItems, ParseError
from .index import FlatIndex
from .store import Catalog, ItemRecord
from .text_embed import normalize_text

logger = logging.getLogger(__name__)

WORKSHEET_COLUMNS = (
    "query_item_id",
    "query_description",
    "candidate_row_id",
    "candidate_description",
    "distance",
    "label",
)
LABELS = ("same", "different")


@dataclass
class LabeledPair:
    query_item_id: str
    candidate_row_id: int
    distance: float
    label: str | None = None  # None until someone labels the row

    def __post_init__(self) -> None:
        if self.distance < 0:
            raise ValueError(f"distance must be non-negative, got {self.distance}")
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")


@dataclass
class WorksheetRow:
    pair: LabeledPair
    query_description: str
    candidate_description: str


@dataclass
class ThresholdDiagnostics:
    tau: float
    f1: float
    precision: float
    recall: float
    n_same: int
    n_different: int
    candidates: list[float] = field(default_factory=list)
    table: list[tuple[float, str]] = field(default_factory=list)


def sample_queries(catalog: Catalog | Sequence[ItemRecord], n: int, seed: int) -> list[ItemRecord]:
    """Uniform sample without replacement over items lacking an identifier."""
    eligible = [r for r in catalog if not r.has_identifier]
    if n > len(eligible):
        raise NotEnoughItems(f"asked for {n} items, only {len(eligible)} lack an identifier")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(eligible), size=n, replace=False)
    return [eligible[i] for i in picks]


def propose_candidates(
    sample: Iterable[ItemRecord],
    index: FlatIndex,
    catalog: Catalog,
    embed: Callable[[str], np.ndarray],
    k: int = 3,
) -> list[WorksheetRow]:
    if index.count == 0:
        raise ValueError("cannot propose candidates from an empty index")
    rows = []
    for item in sample:
        vec = embed(normalize_text(item.description))
        for nb in index.knn_search(vec, k):
            rows.append(
                WorksheetRow(
                    LabeledPair(item.item_id, nb.row_id, nb.distance),
                    item.description,
                    catalog.get(nb.row_id).description,
                )
            )
    return rows


def write_worksheet(path: str | os.PathLike, rows: Iterable[WorksheetRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(WORKSHEET_COLUMNS)
        for row in rows:
            p = row.pair
            writer.writerow(
                [
                    p.query_item_id,
                    row.query_description,
                    p.candidate_row_id,
                    row.candidate_description,
                    repr(p.distance),
                    p.label or "",
                ]
            )


def read_worksheet(path: str | os.PathLike) -> tuple[list[LabeledPair], int]:
    """Labelled pairs from a worksheet, plus the number of blank-label rows skipped."""
    pairs: list[LabeledPair] = []
    blanks = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(WORKSHEET_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ParseError(1, f"worksheet lacks column(s) {sorted(missing)}")
        for row in reader:
            label = (row["label"] or "").strip().lower()
            if not label:
                blanks += 1
                continue
            try:
                pairs.append(
                    LabeledPair(
                        row["query_item_id"],
                        int(row["candidate_row_id"]),
                        float(row["distance"]),
                        label,
                    )
                )
            except ValueError as exc:
                raise ParseError(reader.line_num, str(exc)) from exc
    if blanks:
        logger.warning("ignored %d unlabelled worksheet rows", blanks)
    return pairs, blanks


def _f1_counts(pairs: Sequence[tuple[float, bool]], tau: float) -> tuple[int, int, int]:
    tp = sum(1 for d, same in pairs if same and d <= tau)
    fp = sum(1 for d, same in pairs if not same and d <= tau)
    fn = sum(1 for d, same in pairs if same and d > tau)
    return tp, fp, fn


def derive_threshold(labels: Iterable[LabeledPair]) -> tuple[float, ThresholdDiagnostics]:
    """Pick the midpoint threshold that maximizes F1 for "same" at ``distance <= tau``.

    Candidates are the midpoints between consecutive distinct distances;
    among equal F1 scores the smallest threshold wins.
    """
    pairs = [(p.distance, p.label == "same") for p in labels if p.label is not None]
    n_same = sum(1 for _, s in pairs if s)
    n_diff = len(pairs) - n_same
    if n_same == 0 or n_diff == 0:
        raise DegenerateLabels(f"need both labels, got {n_same} same / {n_diff} different")
    distinct = sorted({d for d, _ in pairs})
    if len(distinct) < 2:
        raise DegenerateLabels("all labelled pairs share one distance; no cut separates them")
    candidates = [(a + b) / 2 for a, b in zip(distinct, distinct[1:])]

    best_tau, best_f1, best_counts = None, Fraction(-1), (0, 0, 0)
    for tau in candidates:
        tp, fp, fn = _f1_counts(pairs, tau)
        f1 = Fraction(2 * tp, 2 * tp + fp + fn)
        if f1 > best_f1:
            best_tau, best_f1, best_counts = tau, f1, (tp, fp, fn)

    tp, fp, fn = best_counts
    diag = ThresholdDiagnostics(
        tau=best_tau,
        f1=float(best_f1),
        precision=tp / (tp + fp) if tp + fp else 0.0,
        recall=tp / (tp + fn) if tp + fn else 0.0,
        n_same=n_same,
        n_different=n_diff,
        candidates=candidates,
        table=sorted((d, "same" if s else "different") for d, s in pairs),
    )
    return best_tau, diag
