"""Item records and the catalog sidecar aligned with the index.

Row ``i`` of a :class:`Catalog` describes the vector at row ``i`` of the
companion :class:`~tiematch.index.FlatIndex`; nothing else joins the two.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import EmptyText, ParseError, RowOutOfRange
from .text_embed import normalize_text

CSV_BASE_COLUMNS = ("item_id", "identifier", "description", "price")
ATTR_PREFIX = "attr_"


@dataclass
class ItemRecord:
    item_id: str
    description: str
    identifier: str | None = None
    price: float | None = None
    attrs: dict[str, str] = field(default_factory=dict)

    @property
    def has_identifier(self) -> bool:
        return self.identifier is not None and self.identifier.strip() != ""

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "identifier": self.identifier,
            "description": self.description,
            "price": self.price,
            "attrs": dict(self.attrs),
        }


@dataclass
class Reject:
    line: int
    reason: str

    def to_json(self) -> dict:
        return {"line": self.line, "reason": self.reason}


class _RowInvalid(Exception):
    pass


def _clean_identifier(value) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str):
        value = str(value)
    return value if value.strip() else None


def _clean_price(value) -> float | None:
    if value is None or (isinstance(value, str) and not value.strip()):
        return None
    if isinstance(value, bool):
        raise _RowInvalid(f"price {value!r} is not a number")
    try:
        price = float(value)
    except (TypeError, ValueError):
        raise _RowInvalid(f"price {value!r} is not a number") from None
    if not math.isfinite(price) or price < 0:
        raise _RowInvalid(f"price {value!r} must be a finite non-negative number")
    return price


def _make_record(ordinal: int, raw: dict, allow_empty: bool) -> ItemRecord:
    description = raw.get("description")
    if description is None:
        description = ""
    if not isinstance(description, str):
        raise _RowInvalid("description must be a string")
    if not allow_empty:
        try:
            normalize_text(description)
        except EmptyText:
            raise _RowInvalid("empty description") from None
    item_id = raw.get("item_id")
    item_id = str(ordinal) if item_id is None or item_id == "" else str(item_id)
    attrs = raw.get("attrs") or {}
    if not isinstance(attrs, dict):
        raise _RowInvalid("attrs must be an object")
    return ItemRecord(
        item_id=item_id,
        description=description,
        identifier=_clean_identifier(raw.get("identifier")),
        price=_clean_price(raw.get("price")),
        attrs={str(k): str(v) for k, v in attrs.items()},
    )


def _jsonl_rows(fh) -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ParseError(lineno, "expected a JSON object")
        yield lineno, obj


def _csv_rows(fh) -> Iterator[tuple[int, dict]]:
    reader = csv.DictReader(fh)
    if reader.fieldnames is None:
        return
    missing = [c for c in ("description",) if c not in reader.fieldnames]
    if missing:
        raise ParseError(1, f"CSV header lacks column(s) {missing}")
    for row in reader:
        if None in row:
            raise ParseError(reader.line_num, "row has more fields than the header")
        attrs = {
            k[len(ATTR_PREFIX):]: v for k, v in row.items() if k.startswith(ATTR_PREFIX) and v
        }
        yield reader.line_num, {
            "item_id": row.get("item_id"),
            "identifier": row.get("identifier"),
            "description": row.get("description"),
            "price": row.get("price"),
            "attrs": attrs,
        }


def ingest(
    path: str | os.PathLike, format: str = "jsonl", *, allow_empty: bool = False
) -> tuple[list[ItemRecord], list[Reject]]:
    """Read items from JSONL or CSV, in file order.

    Rows that are structurally fine but unusable (empty description, bad
    price) go to the reject list; malformed files raise :class:`ParseError`.
    With ``allow_empty`` empty descriptions are kept, so that a matcher can
    report them per item.
    """
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unknown format {format!r}")
    records: list[ItemRecord] = []
    rejects: list[Reject] = []
    with open(path, newline="" if format == "csv" else None, encoding="utf-8") as fh:
        rows = _jsonl_rows(fh) if format == "jsonl" else _csv_rows(fh)
        for ordinal, (lineno, raw) in enumerate(rows, start=1):
            try:
                records.append(_make_record(ordinal, raw, allow_empty))
            except _RowInvalid as exc:
                rejects.append(Reject(lineno, str(exc)))
    return records, rejects


def write_jsonl(path: str | os.PathLike, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=False))
            fh.write("\n")


def write_csv(path: str | os.PathLike, records: Sequence[ItemRecord]) -> None:
    attr_keys = sorted({k for r in records for k in r.attrs})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*CSV_BASE_COLUMNS, *(ATTR_PREFIX + k for k in attr_keys)])
        for r in records:
            writer.writerow(
                [
                    r.item_id,
                    r.identifier or "",
                    r.description,
                    "" if r.price is None else repr(r.price),
                    *(r.attrs.get(k, "") for k in attr_keys),
                ]
            )


class Catalog:
    """Ordered item records; position ``i`` is index row ``i``."""

    def __init__(self, records: Iterable[ItemRecord] = ()) -> None:
        self.records = list(records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ItemRecord]:
        return iter(self.records)

    def get(self, row_id: int) -> ItemRecord:
        if not 0 <= row_id < len(self.records):
            raise RowOutOfRange(f"row {row_id} not in [0, {len(self.records)})")
        return self.records[row_id]

    def get_many(self, row_ids: Iterable[int]) -> list[ItemRecord]:
        return [self.get(r) for r in row_ids]

    def save(self, path: str | os.PathLike) -> None:
        write_jsonl(path, (r.to_json() for r in self.records))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Catalog":
        records, rejects = ingest(path, "jsonl")
        if rejects:
            first = rejects[0]
            raise ParseError(first.line, f"catalog row rejected: {first.reason}")
        return cls(records)


def get(catalog: Catalog, row_id: int) -> ItemRecord:
    return catalog.get(row_id)


def get_many(catalog: Catalog, row_ids: Iterable[int]) -> list[ItemRecord]:
    return catalog.get_many(row_ids)


def length_distribution(records: Iterable[ItemRecord], max_words: int = 30) -> list[int]:
    """Histogram of description word counts.

    Entry ``i`` counts descriptions with ``i`` whitespace tokens; the last
    entry collects everything with ``max_words`` tokens or more.
    """
    counts = [0] * (max_words + 1)
    for rec in records:
        try:
            n = len(normalize_text(rec.description).split(" "))
        except EmptyText:
            n = 0
        counts[min(n, max_words)] += 1
    return counts


def write_length_histogram(path: str | os.PathLike, counts: Sequence[int]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["words", "count"])
        for words, count in enumerate(counts):
            writer.writerow([words, count])
