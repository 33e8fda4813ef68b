# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled bucketing kernels; see fallback.py for the reference semantics."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, log, nearbyint

from ._exact import exact_floor_from_candidate

cnp.import_array()

cdef double GUARD = 1e-9


def bucket_ids(rel, int b, long long d):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] r = np.ascontiguousarray(rel, dtype=np.int64)
    cdef Py_ssize_t n = r.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef long long bp = b // 2
    cdef long long v = bp // 2
    cdef long long q = bp - v
    cdef long long a, base, k0, kk
    cdef double s
    cdef double logd = 1.0
    cdef Py_ssize_t i
    if v > 0:
        if d <= v:
            raise ValueError(f"max distance {d} must exceed b//4 = {v}")
        logd = log(<double> d / <double> v)
    for i in range(n):
        a = r[i]
        base = bp if a > 0 else 0
        if a < 0:
            a = -a
        if v == 0:
            out[i] = base
            continue
        if a < v:
            out[i] = base + a
            continue
        s = v + log(<double> a / <double> v) / logd * (bp - v)
        k0 = <long long> floor(s)
        if fabs(s - nearbyint(s)) < GUARD:
            kk = <long long> nearbyint(s)
            if v <= kk <= bp - 1:
                k0 = exact_floor_from_candidate(a, v, d, q, kk)
        if k0 > bp - 1:
            k0 = bp - 1
        out[i] = base + k0
    return out


def pool_contiguous(emb, bucket_of, int n_buckets):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.ascontiguousarray(emb, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.ascontiguousarray(bucket_of, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t dm = x.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n_buckets, dm))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(n_buckets, dtype=np.int64)
    cdef Py_ssize_t i, j
    cdef long long bkt
    for i in range(n):
        bkt = idx[i]
        counts[bkt] += 1
        for j in range(dm):
            out[bkt, j] += x[i, j]
    for i in range(n_buckets):
        if counts[i] == 0:
            raise ValueError("assignment leaves an empty bucket")
        if counts[i] > 1:
            for j in range(dm):
                out[i, j] /= counts[i]
    return out
