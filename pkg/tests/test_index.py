import hashlib
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import knn_ref, range_ref
from tiematch import index as flat
from tiematch.errors import BadMagic, DimensionMismatch, NormViolation, TruncatedFile, UnsupportedVersion
from tiematch.synth import random_unit_vectors


def as_pairs(neighbors):
    return [(n.row_id, n.distance) for n in neighbors]


def assert_same(got, expected):
    assert [i for i, _ in as_pairs(got)] == [i for i, _ in expected]
    for (_, d), (_, e) in zip(as_pairs(got), expected):
        assert abs(d - e) <= 1e-6


def test_build_empty():
    idx = flat.build([], dim=8)
    assert idx.count == 0 and idx.dim == 8
    assert idx.knn_search(np.eye(8, dtype=np.float32)[0], 3) == []
    assert idx.range_search(np.eye(8, dtype=np.float32)[0], 2.0) == []


def test_build_single_self():
    v = random_unit_vectors(1, 16)[0]
    idx = flat.build([v])
    assert idx.count == 1
    assert as_pairs(idx.knn_search(v, 1)) == [(0, 0.0)]


def test_build_1000_matches_oracle():
    x = random_unit_vectors(1000, 32, seed=1)
    qs = random_unit_vectors(50, 32, seed=2)
    idx = flat.build(x)
    for q in qs:
        assert_same(idx.knn_search(q, 10), knn_ref(x, q, 10))


def test_build_rejects_mixed_dims():
    with pytest.raises(DimensionMismatch):
        flat.build([random_unit_vectors(1, 8)[0], random_unit_vectors(1, 9)[0]])


def test_build_rejects_non_unit():
    with pytest.raises(NormViolation):
        flat.build([np.ones(8, dtype=np.float32)])


def test_add_to_empty_equals_build():
    v = random_unit_vectors(1, 8, seed=3)[0]
    a = flat.FlatIndex(8).add([v])
    b = flat.build([v])
    assert a.vectors.tobytes() == b.vectors.tobytes()


def test_add_new_vector_is_own_nearest():
    x = random_unit_vectors(20, 16, seed=4)
    idx = flat.build(x[:10])
    idx.add(x[10:])
    assert idx.count == 20
    for row in range(10, 20):
        first = idx.knn_search(x[row], 1)[0]
        assert first.row_id == row and first.distance == 0.0


def test_add_preserves_existing_rows():
    x = random_unit_vectors(30, 16, seed=5)
    idx = flat.build(x[:10])
    before = idx.vectors.copy()
    idx.add(x[10:])
    assert np.array_equal(idx.vectors[:10], before)


def test_add_dim_mismatch():
    idx = flat.build(random_unit_vectors(3, 8))
    with pytest.raises(DimensionMismatch):
        idx.add(random_unit_vectors(2, 16))


def test_build_union_equals_incremental():
    a, b = random_unit_vectors(100, 24, seed=6), random_unit_vectors(60, 24, seed=7)
    whole = flat.build(np.concatenate([a, b]))
    grown = flat.build(a).add(b)
    for q in random_unit_vectors(25, 24, seed=8):
        assert whole.knn_search(q, 7) == grown.knn_search(q, 7)
        assert whole.range_search(q, 1.2) == grown.range_search(q, 1.2)


def test_knn_truncates_to_count():
    idx = flat.build(random_unit_vectors(4, 8))
    assert len(idx.knn_search(random_unit_vectors(1, 8, seed=9)[0], 10)) == 4


def test_knn_200x20_matches_oracle():
    x = random_unit_vectors(200, 64, seed=10)
    idx = flat.build(x)
    for q in random_unit_vectors(20, 64, seed=11):
        assert_same(idx.knn_search(q, 5), knn_ref(x, q, 5))


def test_knn_query_dim_mismatch():
    idx = flat.build(random_unit_vectors(3, 8))
    with pytest.raises(DimensionMismatch):
        idx.knn_search(np.ones(9, dtype=np.float32) / 3, 1)
    with pytest.raises(ValueError):
        idx.knn_search(idx.vectors[0], 0)


def test_ties_ordered_by_row_id():
    v, w = random_unit_vectors(2, 8, seed=12)
    idx = flat.build([w, v, w, v, v])
    got = as_pairs(idx.knn_search(v, 3))
    assert got == [(1, 0.0), (3, 0.0), (4, 0.0)]


def test_range_zero_returns_duplicates_only():
    v, w = random_unit_vectors(2, 8, seed=13)
    idx = flat.build([v, w, v])
    assert as_pairs(idx.range_search(v, 0.0)) == [(0, 0.0), (2, 0.0)]


def test_range_two_returns_everything():
    x = random_unit_vectors(50, 8, seed=14)
    idx = flat.build(x)
    q = random_unit_vectors(1, 8, seed=15)[0]
    assert len(idx.range_search(q, 2 + 1e-6)) == 50


def test_range_equals_filtered_full_knn():
    x = random_unit_vectors(300, 16, seed=16)
    idx = flat.build(x)
    for q in random_unit_vectors(10, 16, seed=17):
        full = idx.knn_search(q, idx.count)
        for r in (0.3, 0.9, 1.2, 1.5):
            assert idx.range_search(q, r) == [n for n in full if n.distance <= r]
            assert_same(idx.range_search(q, r), range_ref(x, q, r))


def test_range_rejects_negative_radius():
    idx = flat.build(random_unit_vectors(3, 8))
    with pytest.raises(ValueError):
        idx.range_search(idx.vectors[0], -0.1)


def test_batch_search_equals_single():
    x = random_unit_vectors(500, 32, seed=18)
    idx = flat.build(x)
    qs = random_unit_vectors(150, 32, seed=19)
    assert idx.knn_search_batch(qs, 4) == [idx.knn_search(q, 4) for q in qs]


def test_near_tie_resolved_by_exact_rescoring():
    # rows differ from the query by ~1e-4 in distance, well inside float32
    # dot-product noise for the approximate pass
    rng = np.random.default_rng(20)
    q = random_unit_vectors(1, 256, seed=21)[0].astype(np.float64)
    rows = []
    for _ in range(40):
        v = q + rng.standard_normal(256) * 1e-4
        rows.append(v / np.linalg.norm(v))
    x = np.asarray(rows, dtype=np.float32)
    idx = flat.build(x)
    assert_same(idx.knn_search(q.astype(np.float32), 5), knn_ref(x, q.astype(np.float32), 5))
    r = knn_ref(x, q.astype(np.float32), 20)[-1][1]
    assert_same(idx.range_search(q.astype(np.float32), r), range_ref(x, q.astype(np.float32), r))


unit_sets = st.integers(min_value=2, max_value=60).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(8, 40), st.integers(0, 2**32 - 1))
)


@settings(max_examples=40, deadline=None)
@given(unit_sets, st.floats(0, 2), st.floats(0, 2))
def test_range_monotone_in_radius(params, r1, r2):
    n, dim, seed = params
    x = random_unit_vectors(n, dim, seed=seed)
    idx = flat.build(x)
    q = random_unit_vectors(1, dim, seed=seed + 1)[0]
    lo, hi = sorted((r1, r2))
    small = {n.row_id for n in idx.range_search(q, lo)}
    big = {n.row_id for n in idx.range_search(q, hi)}
    assert small <= big


@settings(max_examples=40, deadline=None)
@given(unit_sets, st.integers(1, 10))
def test_knn_first_distance_is_global_min(params, k):
    n, dim, seed = params
    x = random_unit_vectors(n, dim, seed=seed)
    idx = flat.build(x)
    q = random_unit_vectors(1, dim, seed=seed + 7)[0]
    first = idx.knn_search(q, 1)[0].distance
    everything = idx.range_search(q, 2 + 1e-6)
    assert first == min(nb.distance for nb in everything)
    assert_same(idx.knn_search(q, k), knn_ref(x, q, k))


@settings(max_examples=30, deadline=None)
@given(unit_sets)
def test_permutation_invariance(params):
    n, dim, seed = params
    x = random_unit_vectors(n, dim, seed=seed)
    perm = np.random.default_rng(seed).permutation(n)
    a, b = flat.build(x), flat.build(x[perm])
    q = random_unit_vectors(1, dim, seed=seed + 3)[0]
    da = sorted(round(nb.distance, 9) for nb in a.knn_search(q, n))
    db = sorted(round(nb.distance, 9) for nb in b.knn_search(q, n))
    assert da == db
    # row ids map back through the permutation
    for nb in b.knn_search(q, 3):
        assert np.array_equal(b.vectors[nb.row_id], x[perm[nb.row_id]])


def test_save_load_roundtrip_empty(tmp_path):
    path = tmp_path / "empty.flx"
    flat.save(flat.build([], dim=12), path)
    idx = flat.load(path)
    assert idx.count == 0 and idx.dim == 12
    assert path.stat().st_size == 20


def test_save_load_roundtrip_large(tmp_path):
    x = random_unit_vectors(10_000, 512, seed=22)
    path = tmp_path / "big.flx"
    flat.save(flat.build(x), path)
    idx = flat.load(path)
    assert idx.vectors.tobytes() == x.tobytes()
    assert (idx.dim, idx.count) == (512, 10_000)


def test_file_layout(tmp_path):
    x = random_unit_vectors(3, 8, seed=23)
    path = tmp_path / "i.flx"
    flat.save(flat.build(x), path)
    raw = path.read_bytes()
    assert raw[:4] == b"FLX1"
    assert struct.unpack("<IIQ", raw[4:20]) == (1, 8, 3)
    assert raw[20:] == x.astype("<f4").tobytes()


def test_save_is_deterministic(tmp_path):
    idx = flat.build(random_unit_vectors(100, 16, seed=24))
    flat.save(idx, tmp_path / "a")
    flat.save(idx, tmp_path / "b")
    h = [hashlib.sha256((tmp_path / p).read_bytes()).hexdigest() for p in "ab"]
    assert h[0] == h[1]


def _saved(tmp_path):
    path = tmp_path / "i.flx"
    flat.save(flat.build(random_unit_vectors(5, 8, seed=25)), path)
    return path, bytearray(path.read_bytes())


def test_load_bad_magic(tmp_path):
    path, raw = _saved(tmp_path)
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagic):
        flat.load(path)


def test_load_unsupported_version(tmp_path):
    path, raw = _saved(tmp_path)
    raw[4:8] = struct.pack("<I", 2)
    path.write_bytes(bytes(raw))
    with pytest.raises(UnsupportedVersion):
        flat.load(path)


@pytest.mark.parametrize("cut", [-4, -1])
def test_load_truncated_payload(tmp_path, cut):
    path, raw = _saved(tmp_path)
    path.write_bytes(bytes(raw[:cut]))
    with pytest.raises(TruncatedFile):
        flat.load(path)


def test_load_trailing_bytes(tmp_path):
    path, raw = _saved(tmp_path)
    path.write_bytes(bytes(raw) + b"\0\0\0\0")
    with pytest.raises(TruncatedFile):
        flat.load(path)


def test_load_short_header(tmp_path):
    path, raw = _saved(tmp_path)
    path.write_bytes(bytes(raw[:10]))
    with pytest.raises(TruncatedFile):
        flat.load(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        flat.load(tmp_path / "absent.flx")
