"""Relative positional bucketing: anchor-preserving sequence compression.

Every token maps to one of a fixed budget of buckets according to its signed
distance to the nearest anchor: exact buckets next to the anchor, then
logarithmically wider ones, saturating at the segment edge. Anchors always sit
alone in their bucket, so their embeddings survive pooling bitwise. Segments
span midpoint-to-midpoint between adjacent anchors and receive bucket budgets
proportional to their length, so the assignment always produces exactly
min(c, n) buckets whose members are contiguous token runs.

All functions are pure; per-segment work is independent and order-stable.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels

COMPRESSED_FORMAT = "anchorsum-compressed-v1"


class AllocationError(ValueError):
    pass


@dataclass
class Segment:
    start: int
    end: int  # exclusive
    anchor: int
    local_budget: int = 0

    @property
    def length(self) -> int:
        return self.end - self.start

    @property
    def max_distance(self) -> int:
        """Saturation distance: one past the largest |relative position|."""
        return max(self.anchor - self.start, self.end - 1 - self.anchor) + 1


@dataclass
class BucketAssignment:
    bucket_of: np.ndarray  # int64, one id per token position, non-decreasing
    n_buckets: int
    is_anchor: np.ndarray  # bool per token position
    uniform_fallback: bool = False

    @property
    def n_tokens(self) -> int:
        return int(self.bucket_of.shape[0])


@dataclass
class CompressedSequence:
    embeddings: np.ndarray  # [n_buckets, d_model]
    assignment: BucketAssignment

    @property
    def bucket_positions(self) -> np.ndarray:
        return np.arange(self.assignment.n_buckets)


def relative_bucket(R: int, b: int, d: int) -> int:
    """Bucket id of a single signed relative position.

    b must be even and >= 4; d must exceed b/4. Ids fall in [0, b): the
    negative side uses [0, b/2), the positive side is offset by b/2, and
    |R| >= d saturates into the side's last bucket.
    """
    if b < 4 or b % 2 != 0:
        raise ValueError(f"bucket budget b={b} must be even and >= 4")
    if d <= b / 4:
        raise ValueError(f"max distance d={d} must exceed b/4 = {b / 4}")
    return int(kernels.bucket_ids(np.array([R], dtype=np.int64), b, d)[0])


def _validate_anchors(anchors, n):
    arr = np.asarray(list(anchors), dtype=np.int64)
    if arr.size == 0:
        return arr
    if (np.diff(arr) <= 0).any():
        raise ValueError("anchor positions must be strictly increasing")
    if arr[0] < 0 or arr[-1] >= n:
        raise ValueError(f"anchor positions must lie in [0, {n})")
    return arr


def segment_boundaries(anchors, n: int) -> list[Segment]:
    """Partition [0, n) at midpoints between adjacent anchors; one anchor per
    segment. Adjacent anchors (gap 1) put the boundary just after the left
    anchor so each still owns its own segment."""
    arr = _validate_anchors(anchors, n)
    if arr.size == 0:
        raise ValueError("need at least one anchor; see assign_buckets for the fallback")
    bounds = [0]
    for left, right in zip(arr[:-1], arr[1:]):
        bounds.append(int(left + max(1, (right - left) // 2)))
    bounds.append(n)
    return [
        Segment(start=s, end=e, anchor=int(a))
        for s, e, a in zip(bounds[:-1], bounds[1:], arr)
    ]


def _min_budget(seg: Segment) -> int:
    """Anchor singleton plus one bucket per occupied side."""
    return 1 + (seg.anchor > seg.start) + (seg.end - 1 > seg.anchor)


def allocate_buckets(segments: list[Segment], c: int) -> list[Segment]:
    """Distribute a total budget of min(c, n) buckets over segments,
    proportionally to length by largest remainder, clamped per segment to
    [min(3, length), length], with the clamp imbalance repaired one bucket at
    a time (deficits go to the longest segments that still have headroom)."""
    n = sum(s.length for s in segments)
    if n <= c:
        for s in segments:
            s.local_budget = s.length
        return segments
    if c < len(segments):
        raise AllocationError(
            f"budget c={c} is below the segment count {len(segments)}; "
            f"use a lower anchor ratio"
        )
    floors = [min(3, s.length) for s in segments]
    if sum(floors) > c:
        # tight budget: fall back to the structural minimum per segment
        floors = [_min_budget(s) for s in segments]
        if sum(floors) > c:
            raise AllocationError(
                f"budget c={c} cannot keep every anchor in a singleton bucket "
                f"({len(segments)} segments need {sum(floors)}); "
                f"use a lower anchor ratio"
            )
    quotas = [s.length * c / n for s in segments]
    budgets = [int(q) for q in quotas]
    leftover = c - sum(budgets)
    by_remainder = sorted(
        range(len(segments)), key=lambda i: (-(quotas[i] - budgets[i]), i)
    )
    for i in by_remainder[:leftover]:
        budgets[i] += 1
    budgets = [
        min(max(b, f), s.length) for b, f, s in zip(budgets, floors, segments)
    ]
    total = sum(budgets)
    while total < c:
        candidates = [i for i, s in enumerate(segments) if budgets[i] < s.length]
        i = max(candidates, key=lambda i: (segments[i].length, -i))
        budgets[i] += 1
        total += 1
    while total > c:
        candidates = [i for i in range(len(segments)) if budgets[i] > floors[i]]
        i = max(candidates, key=lambda i: (budgets[i], -i))
        budgets[i] -= 1
        total -= 1
    for s, b in zip(segments, budgets):
        s.local_budget = b
    return segments


def _segment_runs(seg: Segment) -> list[tuple[int, int]]:
    """Bucket the tokens of one segment into exactly local_budget contiguous
    runs, the anchor alone in its own run. Returns (start, length) pairs."""
    if seg.local_budget == seg.length:
        return [(p, 1) for p in range(seg.start, seg.end)]
    rel = np.arange(seg.start, seg.end, dtype=np.int64) - seg.anchor
    b_side = max(2, 2 * ((seg.local_budget - 1) // 2))
    labels = kernels.bucket_ids(rel, b_side, seg.max_distance)
    labels[seg.anchor - seg.start] = -1  # anchor is always its own bucket
    runs = []
    run_start, prev = seg.start, labels[0]
    for off in range(1, seg.length):
        if labels[off] != prev:
            runs.append((run_start, seg.start + off - run_start))
            run_start, prev = seg.start + off, labels[off]
    runs.append((run_start, seg.end - run_start))
    while len(runs) < seg.local_budget:
        i = max(range(len(runs)), key=lambda i: (runs[i][1], -runs[i][0]))
        start, length = runs[i]
        left = (length + 1) // 2
        runs[i : i + 1] = [(start, left), (start + left, length - left)]
    if len(runs) > seg.local_budget:
        raise AssertionError(
            f"segment {seg} produced {len(runs)} buckets for budget {seg.local_budget}"
        )
    return runs


def assign_buckets(n: int, anchors, c: int) -> BucketAssignment:
    """Full token-to-bucket map for a sequence of n tokens.

    n <= c compresses nothing (all singletons). An empty anchor set falls back
    to uniform runs of near-equal size, flagged on the result.
    """
    if n < 1:
        raise ValueError("need at least one token")
    if c < 1:
        raise ValueError("bucket budget must be >= 1")
    arr = _validate_anchors(anchors, n)
    is_anchor = np.zeros(n, dtype=bool)
    is_anchor[arr] = True
    if n <= c:
        return BucketAssignment(
            bucket_of=np.arange(n, dtype=np.int64), n_buckets=n,
            is_anchor=is_anchor,
        )
    if arr.size == 0:
        m = min(c, n)
        bucket_of = (np.arange(n, dtype=np.int64) * m) // n
        return BucketAssignment(bucket_of=bucket_of, n_buckets=m,
                                is_anchor=is_anchor, uniform_fallback=True)
    segments = allocate_buckets(segment_boundaries(arr, n), c)
    bucket_of = np.empty(n, dtype=np.int64)
    next_id = 0
    for seg in segments:
        for start, length in _segment_runs(seg):
            bucket_of[start : start + length] = next_id
            next_id += 1
    return BucketAssignment(bucket_of=bucket_of, n_buckets=next_id,
                            is_anchor=is_anchor)


def compress_sequence(embeddings, assignment: BucketAssignment) -> CompressedSequence:
    """Average-pool embedding rows per bucket (order preserved); rows of
    single-member buckets, anchors included, pass through bitwise."""
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] != assignment.n_tokens:
        raise ValueError(
            f"embedding shape {emb.shape} does not match the "
            f"{assignment.n_tokens}-token assignment"
        )
    pooled = kernels.pool_contiguous(emb, assignment.bucket_of, assignment.n_buckets)
    return CompressedSequence(embeddings=pooled, assignment=assignment)


# serialization -----------------------------------------------------------
def save_assignment_csv(path, assignment: BucketAssignment):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("position,bucket_id,is_anchor\n")
        for pos in range(assignment.n_tokens):
            fh.write(
                f"{pos},{int(assignment.bucket_of[pos])},"
                f"{int(assignment.is_anchor[pos])}\n"
            )
    os.replace(tmp, path)


def save_compressed(path, comp: CompressedSequence, anchors):
    header = {
        "format": COMPRESSED_FORMAT,
        "n": comp.assignment.n_tokens,
        "c": comp.assignment.n_buckets,
        "d_model": int(comp.embeddings.shape[1]),
        "anchors": [int(a) for a in anchors],
        "uniform_fallback": comp.assignment.uniform_fallback,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        np.savez(
            fh,
            __header__=np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8),
            embeddings=comp.embeddings,
            bucket_of=comp.assignment.bucket_of,
            is_anchor=comp.assignment.is_anchor,
        )
    os.replace(tmp, path)


def load_compressed(path):
    with np.load(path) as payload:
        header = json.loads(bytes(payload["__header__"]).decode("utf-8"))
        if header.get("format") != COMPRESSED_FORMAT:
            raise ValueError(f"unsupported compressed container in {path}")
        assignment = BucketAssignment(
            bucket_of=payload["bucket_of"],
            n_buckets=header["c"],
            is_anchor=payload["is_anchor"],
            uniform_fallback=header.get("uniform_fallback", False),
        )
        comp = CompressedSequence(embeddings=payload["embeddings"], assignment=assignment)
    return comp, header
