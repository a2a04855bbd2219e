"""Synthetic corpora for experiments and tests.

Product descriptions follow the short, number-heavy shape of purchase
lines: a tool noun, possibly qualified, followed by a ``size x length``
pair, 4 to 6 tokens in total. The same product recurs with small
spelling differences, as repeat purchases do. Prose sentences are
Portuguese everyday sentences with no vocabulary in common.
"""

from __future__ import annotations

import numpy as np

NOUNS = (
    "screwdriver", "wrench", "hammer", "chisel", "drill bit", "hex key", "pliers",
    "socket", "bolt", "washer", "nut", "anchor", "clamp", "file", "punch", "saw blade",
    "tap", "reamer", "rivet", "hose clamp",
)
QUALIFIERS = (
    "steel", "phillips", "flat", "insulated", "carbide", "brass", "stainless",
    "heavy", "magnetic", "long", "galvanized", "chrome",
)
FRACTIONS = ("1/8", "3/16", "1/4", "5/16", "3/8", "1/2", "5/8", "3/4")
LENGTHS = ("2''", "3''", "4''", "6''", "8''", "10''", "12''")

SUBJECTS = (
    "o menino", "a professora", "meu avô", "a cidade", "o gato", "nossa vizinha",
    "o médico", "a criança", "o pescador", "minha irmã",
)
VERBS = (
    "caminhou", "cantou", "esperou", "sorriu", "dormiu", "viajou", "escreveu",
    "chegou", "trabalhou", "conversou",
)
COMPLEMENTS = (
    "pela praia ao amanhecer", "durante a festa de domingo", "com os amigos na praça",
    "antes do almoço em família", "sob a chuva fina da tarde", "perto da estação antiga",
    "no jardim florido da escola", "depois do jantar tranquilo", "ao lado do rio calmo",
    "na biblioteca silenciosa",
)
UNIT_STYLES = ("{}''", '{}"', "{}in")
SUFFIXES = ("", "", "pc", "un")


def base_products(n: int, seed: int = 0) -> list[tuple[str, ...]]:
    """A pool of distinct products as word tuples, before surface rendering.

    The length is kept as a bare number so that renderings can vary its unit.
    """
    rng = np.random.default_rng(seed)
    seen: dict[tuple[str, ...], None] = {}
    while len(seen) < n:
        noun = NOUNS[rng.integers(len(NOUNS))]
        n_quals = rng.integers(0, 3)
        quals = [QUALIFIERS[i] for i in rng.choice(len(QUALIFIERS), size=n_quals, replace=False)]
        size = FRACTIONS[rng.integers(len(FRACTIONS))]
        length = LENGTHS[rng.integers(len(LENGTHS))].rstrip("'")
        words = [*quals, noun, size, "x", length]
        # two-word nouns can push past six tokens; drop a qualifier
        while len(" ".join(words).split()) > 6:
            words.pop(0)
        seen.setdefault(tuple(words), None)
    return list(seen)


def render(product: tuple[str, ...], rng: np.random.Generator) -> str:
    """One purchase-line spelling of ``product``: unit style and optional pack suffix."""
    *head, length = product
    words = [*head, UNIT_STYLES[rng.integers(len(UNIT_STYLES))].format(length)]
    suffix = SUFFIXES[rng.integers(len(SUFFIXES))]
    if suffix and len(" ".join(words).split()) < 6:
        words.append(suffix)
    return " ".join(words)


def product_descriptions(
    n: int,
    seed: int = 0,
    *,
    pool_size: int = 400,
    pool_seed: int = 0,
    exclude: set[str] | None = None,
) -> list[str]:
    """``n`` renderings of products drawn uniformly from a shared pool.

    Two calls with the same ``pool_seed`` describe the same products, which
    is how a held-out set of purchases relates to an indexed history.
    ``exclude`` rejects exact strings, e.g. those already indexed.
    """
    pool = base_products(pool_size, pool_seed)
    rng = np.random.default_rng(seed)
    exclude = exclude or set()
    out = []
    while len(out) < n:
        text = render(pool[rng.integers(len(pool))], rng)
        if text not in exclude:
            out.append(text)
    return out


def prose_sentences(n: int, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    return [
        " ".join(
            (
                SUBJECTS[rng.integers(len(SUBJECTS))],
                VERBS[rng.integers(len(VERBS))],
                COMPLEMENTS[rng.integers(len(COMPLEMENTS))],
            )
        )
        for _ in range(n)
    ]


def random_unit_vectors(n: int, dim: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x.astype(np.float32)
