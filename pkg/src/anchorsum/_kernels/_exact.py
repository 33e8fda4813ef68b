"""Exact integer decision for log-branch bucket boundaries.

The log-branch id is floor(s) with s = v + q * log(a/v) / log(d/v). When the
float64 value of s lands within the guard band of an integer, the floor is
decided here instead: s >= k0 iff (a/v)^q >= (d/v)^(k0-v), i.e.
d^p * v^(q-p) <= a^q with p = k0 - v, which big integers evaluate exactly.
Float error is orders of magnitude below the guard band, so outside it the
float floor is already certain.
"""

GUARD = 1e-9


def exact_floor_from_candidate(a: int, v: int, d: int, q: int, k0: int) -> int:
    p = k0 - v
    if p < 0:
        return v
    if d ** p * v ** (q - p) <= a ** q:
        return k0
    return k0 - 1
