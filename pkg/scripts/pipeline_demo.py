"""End-to-end run of the command line on generated data.

Writes a history catalog and a query file with a mix of repeated, respelled,
identified and unrelated items, then runs ingest, build, match, validate.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from tiematch.synth import product_descriptions, prose_sentences


def write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def tiematch(*args) -> None:
    cmd = [sys.executable, "-m", "tiematch", *map(str, args)]
    print("$", " ".join(cmd[2:]), flush=True)
    subprocess.run(cmd, check=True)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--history", type=int, default=2000)
    ap.add_argument("--queries", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--work-dir", type=Path, default=Path("runs/demo"))
    args = ap.parse_args()
    work = args.work_dir
    work.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    history = product_descriptions(args.history, seed=args.seed)
    write_jsonl(work / "history.jsonl", (
        {"item_id": f"h{i}", "description": t, "price": round(float(rng.uniform(1, 100)), 2)}
        for i, t in enumerate(history)
    ))
    n = args.queries
    texts = product_descriptions(n - n // 5, seed=args.seed + 1) + prose_sentences(n // 5, seed=args.seed + 2)
    queries = []
    for i, j in enumerate(rng.permutation(len(texts))):
        ident = f"EAN{i:06d}" if rng.random() < 0.1 else None
        queries.append({"item_id": f"q{i}", "identifier": ident, "description": texts[j],
                        "price": round(float(rng.uniform(1, 100)), 2)})
    write_jsonl(work / "queries.jsonl", queries)
    (work / "ood.txt").write_text("\n".join(prose_sentences(200, seed=args.seed + 3)) + "\n", encoding="utf-8")

    tiematch("ingest", work / "history.jsonl", "--out", work / "catalog.jsonl", "--length-hist", work / "lengths.csv")
    tiematch("build", "--catalog", work / "catalog.jsonl", "--index", work / "history.flx")
    tiematch("match", work / "queries.jsonl", "--index", work / "history.flx", "--catalog", work / "catalog.jsonl",
             "--out", work / "results.jsonl")
    tiematch("validate", "--index", work / "history.flx", "--catalog", work / "catalog.jsonl",
             "--ood-corpus", work / "ood.txt", "--out-dir", work / "validate")


if __name__ == "__main__":
    main()
