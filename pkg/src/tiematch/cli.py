"""Command-line pipeline: ingest -> build -> match -> report, plus calibrate/validate.

Option values resolve as flag, then ``TIEMATCH_*`` environment variable,
then default.
"""

from __future__ import annotations

import functools
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import calibrate as cal
from . import index as flat
from . import matcher, store, validate
from .errors import DegenerateLabels, TieMatchError
from .text_embed import EmbedderConfig, HashEmbedder, RemoteEmbedder, normalize_text

logger = logging.getLogger("tiematch")


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (OSError, TieMatchError, ValueError) as exc:
            _fail(str(exc))

    return wrapper


def meta_path(index_path: str | os.PathLike) -> Path:
    return Path(f"{index_path}.meta.json")


def _write_json(path: str | os.PathLike, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _embedder_from_meta(index_path: str, endpoint: str | None, batch_size: int, timeout: float):
    path = meta_path(index_path)
    if not path.exists():
        raise OSError(f"{path} not found; was the index made by 'tiematch build'?")
    meta = json.loads(path.read_text(encoding="utf-8"))["embedder"]
    if meta["kind"] == "hash":
        return HashEmbedder(EmbedderConfig.from_dict(meta))
    client = RemoteEmbedder(endpoint or meta["endpoint"], max_batch=batch_size, timeout=timeout)
    client.dim = meta["dim"]
    return client


def _load_pair(index_path: str, catalog_path: str) -> tuple[flat.FlatIndex, store.Catalog]:
    index = flat.load(index_path)
    catalog = store.Catalog.load(catalog_path)
    if len(catalog) != index.count:
        raise ValueError(f"catalog has {len(catalog)} rows but index has {index.count}")
    return index, catalog


fmt_option = click.option(
    "--format", "fmt", type=click.Choice(["jsonl", "csv"]), default="jsonl",
    envvar="TIEMATCH_FORMAT", show_default=True, help="Input item file format.",
)
endpoint_option = click.option(
    "--endpoint", envvar="TIEMATCH_ENDPOINT", default=None,
    help="Remote embedding service base URL (replaces the local hashed embedder).",
)
batch_option = click.option(
    "--batch-size", type=click.IntRange(min=1), default=64, envvar="TIEMATCH_BATCH_SIZE",
    show_default=True, help="Texts per request to the remote embedder.",
)
timeout_option = click.option(
    "--timeout", type=float, default=30.0, envvar="TIEMATCH_TIMEOUT", show_default=True,
    help="Remote embedder timeout per request, in seconds.",
)
tau_option = click.option(
    "--tau", type=float, default=matcher.DEFAULT_TAU, envvar="TIEMATCH_TAU",
    show_default=True, help="Match threshold on L2 distance to the nearest neighbor.",
)


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose: bool) -> None:
    """Match item descriptions against a history of past purchases."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.argument("input_path", type=click.Path(dir_okay=False))
@fmt_option
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Catalog JSONL to write.")
@click.option("--rejects", "rejects_path", type=click.Path(dir_okay=False), default=None,
              help="Reject report (default: <out>.rejects.jsonl).")
@click.option("--length-hist", type=click.Path(dir_okay=False), default=None,
              help="Also write the description word-count histogram CSV here.")
@handles_errors
def ingest(input_path, fmt, out_path, rejects_path, length_hist):
    """Read raw items into a catalog, setting aside unusable rows."""
    records, rejects = store.ingest(input_path, fmt)
    store.Catalog(records).save(out_path)
    store.write_jsonl(rejects_path or f"{out_path}.rejects.jsonl", (r.to_json() for r in rejects))
    if length_hist:
        store.write_length_histogram(length_hist, store.length_distribution(records))
    click.echo(f"{len(records)} accepted, {len(rejects)} rejected")


@main.command()
@click.option("--catalog", "catalog_path", type=click.Path(dir_okay=False), required=True)
@click.option("--index", "index_path", type=click.Path(dir_okay=False), required=True)
@click.option("--dim", type=int, default=512, envvar="TIEMATCH_DIM", show_default=True)
@click.option("--ngram-sizes", default="3,4,5", show_default=True, help="Comma-separated char n-gram sizes.")
@click.option("--word-unigrams/--no-word-unigrams", default=True, show_default=True)
@endpoint_option
@batch_option
@timeout_option
@handles_errors
def build(catalog_path, index_path, dim, ngram_sizes, word_unigrams, endpoint, batch_size, timeout):
    """Embed every catalog description and write the flat index."""
    catalog = store.Catalog.load(catalog_path)
    texts = [normalize_text(r.description) for r in catalog]
    if endpoint:
        with RemoteEmbedder(endpoint, max_batch=batch_size, timeout=timeout) as client:
            vectors = client.embed(texts)
            if client.renormalized:
                click.echo(f"renormalized {client.renormalized} service vectors to unit length")
            dim = client.dim if client.dim is not None else dim
        meta = {"kind": "remote", "endpoint": endpoint, "dim": dim}
    else:
        sizes = frozenset(int(n) for n in ngram_sizes.split(",") if n.strip())
        cfg = EmbedderConfig(dim=dim, char_ngram_sizes=sizes, include_word_unigrams=word_unigrams)
        vectors = HashEmbedder(cfg).embed(texts)
        meta = {"kind": "hash", **cfg.to_dict()}
    index = flat.build(vectors, dim=dim)
    flat.save(index, index_path)
    _write_json(meta_path(index_path), {"embedder": meta, "count": index.count})
    click.echo(f"index: dim={index.dim} count={index.count}")


def _print_table(report: matcher.MatchReport) -> None:
    click.echo(f"{'Result':<10}{'No. items':>12}")
    click.echo(f"{'Match':<10}{report.matched:>12,}")
    click.echo(f"{'unique':<10}{report.unique:>12,}")
    click.echo(f"searched={report.searched:,} identified={report.identified:,} errors={report.errors:,}")
    click.echo(f"match rate: {100 * report.match_rate:.2f}%")


@main.command()
@click.argument("queries_path", type=click.Path(dir_okay=False))
@click.option("--index", "index_path", type=click.Path(dir_okay=False), required=True)
@click.option("--catalog", "catalog_path", type=click.Path(dir_okay=False), required=True)
@fmt_option
@tau_option
@click.option("--epsilon", type=float, default=matcher.DEFAULT_EPSILON, envvar="TIEMATCH_EPSILON",
              show_default=True, help="Radius expansion used to collect the tie list.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Results JSONL.")
@click.option("--summary", "summary_path", type=click.Path(dir_okay=False), default=None,
              help="Summary JSON (default: <out>.summary.json).")
@endpoint_option
@batch_option
@timeout_option
@handles_errors
def match(queries_path, index_path, catalog_path, fmt, tau, epsilon, out_path, summary_path,
          endpoint, batch_size, timeout):
    """Match query items against the index and write per-item results."""
    params = matcher.MatchParams(tau=tau, epsilon=epsilon)
    index, catalog = _load_pair(index_path, catalog_path)
    items, _ = store.ingest(queries_path, fmt, allow_empty=True)
    embedder = _embedder_from_meta(index_path, endpoint, batch_size, timeout)
    results, report = matcher.match_batch(items, index, catalog, embedder, params)
    matcher.write_results(out_path, results)
    _write_json(summary_path or f"{out_path}.summary.json", report.to_json())
    _print_table(report)


@main.command()
@click.argument("results_path", type=click.Path(dir_okay=False))
@handles_errors
def report(results_path):
    """Recompute and print the match/unique table from a results file."""
    _print_table(matcher.report_from_jsonl(results_path))


@main.group()
def calibrate():
    """Threshold calibration via a labelling worksheet."""


@calibrate.command()
@click.option("--catalog", "catalog_path", type=click.Path(dir_okay=False), required=True)
@click.option("--index", "index_path", type=click.Path(dir_okay=False), required=True)
@click.option("--n", "n", type=click.IntRange(min=1), required=True, help="Number of items to sample.")
@click.option("--seed", type=int, default=0, envvar="TIEMATCH_SEED", show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--worksheet", "worksheet_path", type=click.Path(dir_okay=False), required=True)
@endpoint_option
@batch_option
@timeout_option
@handles_errors
def propose(catalog_path, index_path, n, seed, k, worksheet_path, endpoint, batch_size, timeout):
    """Sample items and write their nearest candidates for labelling."""
    index, catalog = _load_pair(index_path, catalog_path)
    embedder = _embedder_from_meta(index_path, endpoint, batch_size, timeout)
    sample = cal.sample_queries(catalog, n, seed)
    rows = cal.propose_candidates(sample, index, catalog, embedder, k)
    cal.write_worksheet(worksheet_path, rows)
    click.echo(f"wrote {len(rows)} candidate rows for {len(sample)} items")


@calibrate.command()
@click.option("--worksheet", "worksheet_path", type=click.Path(dir_okay=False), required=True)
@handles_errors
def derive(worksheet_path):
    """Read a labelled worksheet and print the best-F1 threshold."""
    pairs, blanks = cal.read_worksheet(worksheet_path)
    try:
        tau, diag = cal.derive_threshold(pairs)
    except DegenerateLabels as exc:
        _fail(str(exc))
    if blanks:
        click.echo(f"ignored {blanks} unlabelled rows")
    click.echo(f"tau={tau:.6g}")
    click.echo(
        f"f1={diag.f1:.4f} precision={diag.precision:.4f} recall={diag.recall:.4f} "
        f"same={diag.n_same} different={diag.n_different}"
    )
    for distance, label in diag.table:
        click.echo(f"  {distance:.6f}  {label}")


@main.command(name="validate")
@click.option("--index", "index_path", type=click.Path(dir_okay=False), required=True)
@click.option("--catalog", "catalog_path", type=click.Path(dir_okay=False), required=True)
@click.option("--ood-corpus", type=click.Path(dir_okay=False), default=None,
              help="Text file, one foreign-domain sentence per line.")
@tau_option
@click.option("--bin-width", type=float, default=validate.DEFAULT_BIN_WIDTH, show_default=True)
@click.option("--sample", type=click.IntRange(min=1), default=None,
              help="Rows to self-query (default: all).")
@click.option("--seed", type=int, default=0, envvar="TIEMATCH_SEED", show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@endpoint_option
@batch_option
@timeout_option
@handles_errors
def validate_cmd(index_path, catalog_path, ood_corpus, tau, bin_width, sample, seed, out_dir,
                 endpoint, batch_size, timeout):
    """Self-query, second-neighbor and out-of-domain checks on an index."""
    index, catalog = _load_pair(index_path, catalog_path)
    embedder = _embedder_from_meta(index_path, endpoint, batch_size, timeout)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = np.arange(index.count)
    if sample is not None and sample < index.count:
        rows = np.sort(np.random.default_rng(seed).choice(index.count, size=sample, replace=False))
    rows = rows.tolist()

    selfq = validate.self_query_check(index, rows)
    aligned = validate.alignment_check(index, catalog, embedder, rows[:200])
    second = validate.second_neighbor_distribution(index, rows, bin_width) if index.count >= 2 else None
    summary = {
        "self_query": {"checked": selfq.checked, "violations": [r for r, _ in selfq.violations]},
        "alignment": {"checked": aligned.checked, "violations": [r for r, _ in aligned.violations]},
    }
    if second is not None:
        second.histogram.write_csv(out / "second_neighbor.csv")
        summary["second_neighbor"] = {"queries": second.queries, "skips": second.skips}
    if ood_corpus:
        with open(ood_corpus, encoding="utf-8") as fh:
            corpus = [line for line in fh if line.strip()]
        ood = validate.out_of_domain_check(index, corpus, embedder, tau, bin_width)
        ood.first.write_csv(out / "ood_first.csv")
        ood.second.write_csv(out / "ood_second.csv")
        summary["out_of_domain"] = ood.summary()
        click.echo(f"out-of-domain: {ood.queries} queries, fraction_below_tau={ood.fraction_below_tau:.4f}")
    _write_json(out / "summary.json", summary)
    click.echo(f"self-query: {selfq.checked} rows, {len(selfq.violations)} violations")
    click.echo(f"alignment: {aligned.checked} rows, {len(aligned.violations)} violations")
    if selfq.violations or aligned.violations:
        sys.exit(1)


if __name__ == "__main__":
    main()
