"""Match fixtures whose distances are checked with the reference embedder."""

from __future__ import annotations

import numpy as np

from oracles import embed_ref, exhaustive_scan
from tiematch import index as flat
from tiematch.store import Catalog, ItemRecord
from tiematch.synth import product_descriptions, prose_sentences
from tiematch.text_embed import HashEmbedder, normalize_text

MARGIN = 1e-4  # keep fixture distances clear of the float32/float64 rounding band


def ref_matrix(texts):
    return np.array([embed_ref(normalize_text(t)) for t in texts])


def oracle_first_distance(history_ref: np.ndarray, text: str) -> float:
    return exhaustive_scan(history_ref, embed_ref(normalize_text(text)))[0][1]


def make_history(n: int = 400, seed: int = 100, price_of=lambda i: 10.0 + i % 9):
    texts = product_descriptions(n, seed=seed)
    catalog = Catalog(
        ItemRecord(f"h{i}", t, price=price_of(i)) for i, t in enumerate(texts)
    )
    emb = HashEmbedder()
    index = flat.build(emb.embed([normalize_text(t) for t in texts]))
    return texts, catalog, index, emb


def split_queries(history_texts, n_close: int, n_novel: int, tau: float = 0.4, seed: int = 200):
    """``n_close`` queries with oracle 1-NN distance <= tau and ``n_novel`` beyond it.

    Half the close queries are verbatim history lines, the rest respellings
    that the oracle places within tau; novel queries are prose sentences.
    """
    ref = ref_matrix(history_texts)
    rng = np.random.default_rng(seed)
    n_copies = n_close // 2
    close = [history_texts[i] for i in rng.choice(len(history_texts), n_copies, replace=False)]
    for cand in product_descriptions(20 * n_close + 50, seed=seed + 1, exclude=set(history_texts)):
        if len(close) == n_close:
            break
        if cand not in close and oracle_first_distance(ref, cand) <= tau - MARGIN:
            close.append(cand)
    assert len(close) == n_close, "not enough near variants; enlarge the candidate pool"

    novel = []
    for cand in prose_sentences(10 * n_novel + 50, seed=seed + 2):
        if len(novel) == n_novel:
            break
        if cand not in novel and oracle_first_distance(ref, cand) > tau + MARGIN:
            novel.append(cand)
    assert len(novel) == n_novel
    return close, novel


def as_items(texts, prefix):
    return [ItemRecord(f"{prefix}{i}", t, price=11.0) for i, t in enumerate(texts)]
