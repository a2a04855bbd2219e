import csv

import numpy as np
import pytest

from oracles import l2
from tiematch import index as flat
from tiematch.errors import RowOutOfRange
from tiematch.store import Catalog, ItemRecord
from tiematch.synth import product_descriptions, prose_sentences, random_unit_vectors
from tiematch.text_embed import HashEmbedder, normalize_text
from tiematch.validate import (
    Histogram,
    alignment_check,
    out_of_domain_check,
    second_neighbor_distribution,
    self_query_check,
)


def test_histogram_bins_cover_zero_to_two(tmp_path):
    h = Histogram()
    assert len(h.counts) == 40
    for d in (0.0, 0.049, 0.05, 1.99, 2.0, 2.0000005):
        h.add(d)
    assert h.counts[0] == 2 and h.counts[1] == 1 and h.counts[-1] == 3
    h.write_csv(tmp_path / "h.csv")
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["bin_start", "bin_end", "count"]
    assert rows[1][:2] == ["0.0", "0.05"] and rows[-1][:2] == ["1.95", "2.0"]
    assert sum(int(r[2]) for r in rows[1:]) == 6


def test_histogram_custom_width():
    assert len(Histogram(0.3).counts) == 7
    assert Histogram(0.3).rows()[-1][:2] == (1.8, 2.0)
    with pytest.raises(ValueError):
        Histogram(0)


def test_self_query_every_row():
    x = random_unit_vectors(1000, 64, seed=1)
    idx = flat.build(x)
    rep = self_query_check(idx, range(idx.count))
    assert rep.checked == 1000 and rep.ok


def test_self_query_with_duplicates():
    x = random_unit_vectors(5, 16, seed=2)
    idx = flat.build(np.concatenate([x, x[:2]]))
    rep = self_query_check(idx, range(idx.count))
    assert rep.ok


def test_self_query_out_of_range():
    idx = flat.build(random_unit_vectors(3, 8))
    with pytest.raises(RowOutOfRange):
        self_query_check(idx, [3])


def test_second_neighbor_two_vectors():
    x = random_unit_vectors(2, 16, seed=3)
    idx = flat.build(x)
    d = l2(x[0].astype(np.float64), x[1].astype(np.float64))
    dist = second_neighbor_distribution(idx, [0, 1])
    assert dist.skips == 0
    nonzero = [i for i, c in enumerate(dist.histogram.counts) if c]
    assert nonzero == [int(d // 0.05)] and dist.histogram.counts[nonzero[0]] == 2


def test_second_neighbor_all_duplicates():
    v = random_unit_vectors(1, 8, seed=4)
    idx = flat.build(np.repeat(v, 4, axis=0))
    dist = second_neighbor_distribution(idx, range(4))
    assert dist.histogram.total == 0 and dist.skips == 4


def test_second_neighbor_skips_past_many_duplicates():
    v, w = random_unit_vectors(2, 8, seed=5)
    idx = flat.build(np.concatenate([np.repeat(v[None], 6, axis=0), w[None]]))
    dist = second_neighbor_distribution(idx, [0])
    assert dist.skips == 0 and dist.histogram.total == 1
    expected_bin = int(l2(v.astype(np.float64), w.astype(np.float64)) // 0.05)
    assert dist.histogram.counts[expected_bin] == 1


def test_second_neighbor_conservation():
    x = random_unit_vectors(300, 16, seed=6)
    idx = flat.build(np.concatenate([x, x[:50]]))
    dist = second_neighbor_distribution(idx, range(idx.count))
    assert dist.histogram.total == dist.queries - dist.skips == 350


@pytest.fixture(scope="module")
def product_index():
    texts = product_descriptions(1000, seed=11)
    emb = HashEmbedder()
    return texts, flat.build(emb.embed([normalize_text(t) for t in texts])), emb


def test_ood_self_copy_negative_control(product_index):
    texts, idx, emb = product_index
    rep = out_of_domain_check(idx, texts[:100], emb, 0.4)
    assert rep.fraction_below_tau == 1.0
    assert rep.first.counts[0] == 100


def test_ood_prose_far_from_products(product_index):
    texts, idx, emb = product_index
    rep = out_of_domain_check(idx, prose_sentences(200, seed=12), emb, 0.4)
    assert rep.fraction_below_tau <= 0.01
    assert rep.first.total == rep.queries == 200
    assert rep.second.total == rep.queries - rep.skips


def test_ood_single_row_index_counts_skips():
    emb = HashEmbedder()
    idx = flat.build([emb("nut 1/2")])
    rep = out_of_domain_check(idx, ["o gato dormiu", "a casa"], emb, 0.4)
    assert rep.first.total == 2 and rep.second.total == 0 and rep.skips == 2
    assert rep.summary() == {"queries": 2, "skips": 2, "fraction_below_tau": 0.0}


def test_ood_accepts_plain_callable(product_index):
    texts, idx, emb = product_index
    a = out_of_domain_check(idx, texts[:5], lambda t: emb(t), 0.4)
    assert a.fraction_below_tau == 1.0


def test_ood_empty_corpus(product_index):
    texts, idx, emb = product_index
    with pytest.raises(ValueError):
        out_of_domain_check(idx, [], emb, 0.4)


def test_alignment_check_detects_misalignment(product_index):
    texts, idx, emb = product_index
    good = Catalog(ItemRecord(str(i), t) for i, t in enumerate(texts))
    assert alignment_check(idx, good, emb, range(50)).violations == []
    shifted = Catalog(ItemRecord(str(i), t) for i, t in enumerate(texts[1:] + texts[:1]))
    rep = alignment_check(idx, shifted, emb, range(50))
    assert len(rep.violations) > 40
