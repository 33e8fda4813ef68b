"""Pure numpy kernels, import-time fallback when the extension is not built.

Semantics are identical to the compiled kernels: both resolve near-integer
log-branch values exactly, so bucket ids agree everywhere, and both copy
single-member buckets through untouched, so anchor rows survive bitwise.
"""

import numpy as np

from ._exact import GUARD, exact_floor_from_candidate


def bucket_ids(rel, b: int, d: int) -> np.ndarray:
    """Bucket id per signed relative position.

    b is the (even, >= 2) per-side-symmetric bucket count, d the distance at
    which the log spacing saturates into the side's last bucket. Ids land in
    [0, b): negatives in [0, b/2), positives offset by b/2.
    """
    rel = np.asarray(rel, dtype=np.int64)
    bp = b // 2
    v = bp // 2
    out = np.where(rel > 0, bp, 0).astype(np.int64)
    a = np.abs(rel)
    if v == 0:
        return out
    if d <= v:
        raise ValueError(f"max distance {d} must exceed b//4 = {v}")
    small = a < v
    out[small] += a[small]
    big = ~small
    if big.any():
        ab = a[big]
        s = v + np.log(ab / v) / np.log(d / v) * (bp - v)
        k = np.floor(s).astype(np.int64)
        near = np.abs(s - np.rint(s)) < GUARD
        if near.any():
            q = bp - v
            for i in np.nonzero(near)[0]:
                k0 = int(np.rint(s[i]))
                if v <= k0 <= bp - 1:
                    k[i] = exact_floor_from_candidate(int(ab[i]), v, d, q, k0)
        out[big] += np.minimum(k, bp - 1)
    return out


def pool_contiguous(emb, bucket_of, n_buckets: int) -> np.ndarray:
    """Mean-pool rows sharing a bucket id; ids must be non-decreasing with
    every id in [0, n_buckets) occupied."""
    emb = np.ascontiguousarray(emb, dtype=np.float64)
    idx = np.asarray(bucket_of, dtype=np.int64)
    counts = np.bincount(idx, minlength=n_buckets)
    if counts.min() < 1:
        raise ValueError("assignment leaves an empty bucket")
    starts = np.zeros(n_buckets, dtype=np.int64)
    np.cumsum(counts[:-1], out=starts[1:])
    out = np.add.reduceat(emb, starts, axis=0) / counts[:, None]
    singles = counts == 1
    if singles.any():
        out[singles] = emb[starts[singles]]
    return out
