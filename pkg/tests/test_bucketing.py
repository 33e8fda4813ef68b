import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorsum import _kernels as kernels
from anchorsum.bucketing import (AllocationError, Segment, assign_buckets,
                                 allocate_buckets, compress_sequence,
                                 load_compressed, relative_bucket,
                                 save_assignment_csv, save_compressed,
                                 segment_boundaries)


def oracle_bucket(R, b, d):
    """Exact-arithmetic evaluator of the bucket id, written independently:
    the log-branch floor is decided by big-integer power comparisons only."""
    bp = b // 2
    offset = bp if R > 0 else 0
    a = abs(R)
    v = bp // 2
    if v == 0:
        return offset
    if a < v:
        return offset + a
    # floor(v + (bp-v) * log(a/v) / log(d/v)) clamped to bp-1:
    # v+p <= s  <=>  (d/v)^p <= (a/v)^q  <=>  d^p * v^(q-p) <= a^q
    q = bp - v
    lhs = a ** q
    p = 0
    while p + 1 <= bp - 1 - v and d ** (p + 1) * v ** (q - p - 1) <= lhs:
        p += 1
    return offset + v + p


GRID_B = (8, 16, 32, 64, 128, 1024)
GRID_D = lambda b: sorted({b, 2 * b, 128, 16384})


class TestRelativeBucket:
    def test_zero_distance(self):
        assert relative_bucket(0, 8, 16) == 0

    def test_unit_offsets(self):
        assert relative_bucket(-1, 8, 16) == 1
        assert relative_bucket(+1, 8, 16) == 5

    def test_log_branch_example(self):
        assert relative_bucket(-3, 8, 16) == 2

    def test_saturation_at_max_distance(self):
        for R in (16, 17, 400):
            assert relative_bucket(-R, 8, 16) == 3
            assert relative_bucket(R, 8, 16) == 7

    def test_precondition_checks(self):
        with pytest.raises(ValueError):
            relative_bucket(1, 7, 16)
        with pytest.raises(ValueError):
            relative_bucket(1, 2, 16)
        with pytest.raises(ValueError):
            relative_bucket(1, 8, 2)

    def test_matches_exact_oracle_spot(self):
        for b in (8, 16):
            for d in GRID_D(b):
                if d <= b / 4:
                    continue
                for R in range(-d - 8, d + 9):
                    assert relative_bucket(R, b, d) == oracle_bucket(R, b, d)

    def test_monotone_in_distance_per_side(self):
        for b, d in ((8, 16), (32, 128), (64, 64)):
            ids = kernels.bucket_ids(np.arange(1, d + 9), b, d)
            assert (np.diff(ids) >= 0).all()
            ids = kernels.bucket_ids(-np.arange(1, d + 9), b, d)
            assert (np.diff(ids) >= 0).all()

    def test_result_range(self):
        rng = np.random.default_rng(0)
        for b, d in ((8, 16), (128, 256), (1024, 16384)):
            R = rng.integers(-3 * d, 3 * d, size=500)
            ids = kernels.bucket_ids(R, b, d)
            assert ids.min() >= 0 and ids.max() < b


class TestSegmentBoundaries:
    def test_midpoint_example(self):
        segs = segment_boundaries([2, 8], 12)
        assert [(s.start, s.end) for s in segs] == [(0, 5), (5, 12)]
        assert [s.anchor for s in segs] == [2, 8]

    def test_single_anchor(self):
        segs = segment_boundaries([40], 100)
        assert [(s.start, s.end) for s in segs] == [(0, 100)]

    def test_adjacent_anchors_keep_own_segments(self):
        segs = segment_boundaries([3, 4], 10)
        assert all(s.start <= s.anchor < s.end for s in segs)

    @given(st.integers(1, 40), st.integers(41, 2000), st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_partition_property(self, k, n, seed):
        rng = np.random.default_rng(seed)
        anchors = sorted(rng.choice(n, size=min(k, n), replace=False).tolist())
        segs = segment_boundaries(anchors, n)
        assert segs[0].start == 0 and segs[-1].end == n
        for left, right in zip(segs[:-1], segs[1:]):
            assert left.end == right.start
        for s, a in zip(segs, anchors):
            assert s.start <= a < s.end

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            segment_boundaries([5], 5)
        with pytest.raises(ValueError):
            segment_boundaries([3, 3], 10)


def _segments(lengths, anchor_offsets=None):
    segs, start = [], 0
    for i, length in enumerate(lengths):
        off = length // 2 if anchor_offsets is None else anchor_offsets[i]
        segs.append(Segment(start=start, end=start + length, anchor=start + off))
        start += length
    return segs


class TestAllocateBuckets:
    def test_exact_proportional_split(self):
        segs = allocate_buckets(_segments([40, 60]), 10)
        assert [s.local_budget for s in segs] == [4, 6]

    def test_identity_when_budget_covers_everything(self):
        segs = allocate_buckets(_segments([5, 7]), 1024)
        assert [s.local_budget for s in segs] == [5, 7]

    def test_budget_below_segment_count_rejected(self):
        with pytest.raises(AllocationError):
            allocate_buckets(_segments([10, 10, 10]), 2)

    @given(st.integers(0, 10_000))
    @settings(max_examples=200, deadline=None)
    def test_random_configurations_sum_and_clamp(self, seed):
        rng = np.random.default_rng(seed)
        n_segs = int(rng.integers(1, 30))
        lengths = rng.integers(1, 60, size=n_segs).tolist()
        n = sum(lengths)
        c = int(rng.integers(4 * n_segs, max(4 * n_segs, n) + 8))
        segs = allocate_buckets(_segments(lengths), c)
        budgets = [s.local_budget for s in segs]
        assert sum(budgets) == min(c, n)
        for s, b in zip(segs, budgets):
            assert min(3, s.length) <= b <= s.length or sum(lengths) <= c


class TestAssignBuckets:
    def test_two_anchor_budget_shape(self):
        asn = assign_buckets(40, [10, 30], 10)
        counts = np.bincount(asn.bucket_of, minlength=10)
        assert asn.n_buckets == 10
        assert counts.min() >= 1
        assert counts[asn.bucket_of[10]] == 1 and counts[asn.bucket_of[30]] == 1

    def test_identity_when_n_small(self):
        asn = assign_buckets(5, [2], 1024)
        assert asn.n_buckets == 5
        np.testing.assert_array_equal(asn.bucket_of, np.arange(5))

    def test_empty_anchor_fallback_uniform(self):
        asn = assign_buckets(100, [], 10)
        assert asn.uniform_fallback and asn.n_buckets == 10
        counts = np.bincount(asn.bucket_of)
        assert counts.max() - counts.min() <= 1

    @given(st.integers(0, 10_000))
    @settings(max_examples=150, deadline=None)
    def test_random_instances_structurally_sound(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 2000))
        c = int(rng.choice([16, 64, 256, 1024]))
        max_k = max(1, min(int(0.064 * n), c // 4))
        k = int(rng.integers(1, max_k + 1))
        anchors = sorted(rng.choice(n, size=min(k, n), replace=False).tolist())
        asn = assign_buckets(n, anchors, c)
        counts = np.bincount(asn.bucket_of, minlength=asn.n_buckets)
        assert asn.n_buckets == min(c, n)
        assert counts.min() >= 1
        assert (np.diff(asn.bucket_of) >= 0).all()  # contiguous runs in order
        for a in anchors:
            assert counts[asn.bucket_of[a]] == 1


def _naive_pool(emb, bucket_of, n_buckets):
    out = np.zeros((n_buckets, emb.shape[1]))
    for b in range(n_buckets):
        rows = [emb[i] for i in range(len(bucket_of)) if bucket_of[i] == b]
        out[b] = np.mean(rows, axis=0)
    return out


class TestCompressSequence:
    def test_all_singletons_identity(self):
        emb = np.random.default_rng(0).standard_normal((6, 4))
        asn = assign_buckets(6, [3], 1024)
        comp = compress_sequence(emb, asn)
        np.testing.assert_array_equal(comp.embeddings, emb)

    def test_two_row_mean(self):
        emb = np.array([[1.0, 1.0], [3.0, 3.0]])
        asn = assign_buckets(2, [], 1)
        comp = compress_sequence(emb, asn)
        np.testing.assert_array_equal(comp.embeddings, [[2.0, 2.0]])

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(1)
        emb = rng.standard_normal((300, 16))
        anchors = sorted(rng.choice(300, 12, replace=False).tolist())
        asn = assign_buckets(300, anchors, 64)
        comp = compress_sequence(emb, asn)
        naive = _naive_pool(emb, asn.bucket_of, asn.n_buckets)
        np.testing.assert_allclose(comp.embeddings, naive, atol=1e-12)

    def test_anchor_rows_bitwise(self):
        rng = np.random.default_rng(2)
        emb = rng.standard_normal((500, 8))
        anchors = sorted(rng.choice(500, 20, replace=False).tolist())
        asn = assign_buckets(500, anchors, 128)
        comp = compress_sequence(emb, asn)
        for a in anchors:
            assert (comp.embeddings[asn.bucket_of[a]] == emb[a]).all()

    def test_mean_pooling_linearity(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((80, 6))
        y = rng.standard_normal((80, 6))
        asn = assign_buckets(80, [10, 50], 16)
        alpha, beta = 0.7, -1.3
        left = compress_sequence(alpha * x + beta * y, asn).embeddings
        right = (alpha * compress_sequence(x, asn).embeddings
                 + beta * compress_sequence(y, asn).embeddings)
        np.testing.assert_allclose(left, right, atol=1e-12)

    def test_shape_mismatch(self):
        asn = assign_buckets(10, [4], 4)
        with pytest.raises(ValueError):
            compress_sequence(np.zeros((11, 3)), asn)


class TestSerialization:
    def test_assignment_csv(self, tmp_path):
        asn = assign_buckets(12, [4], 6)
        path = tmp_path / "assign.csv"
        save_assignment_csv(path, asn)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "position,bucket_id,is_anchor"
        assert len(lines) == 13
        assert lines[1 + 4].split(",")[2] == "1"

    def test_compressed_container_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        emb = rng.standard_normal((50, 8))
        asn = assign_buckets(50, [7, 30], 16)
        comp = compress_sequence(emb, asn)
        path = tmp_path / "comp.npz"
        save_compressed(path, comp, [7, 30])
        loaded, header = load_compressed(path)
        assert header["n"] == 50 and header["c"] == 16 and header["anchors"] == [7, 30]
        np.testing.assert_array_equal(loaded.embeddings, comp.embeddings)
        np.testing.assert_array_equal(loaded.assignment.bucket_of, asn.bucket_of)
