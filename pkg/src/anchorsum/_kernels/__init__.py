"""Hot-loop kernels: compiled extension when built, numpy fallback otherwise."""

from . import fallback

try:
    from . import _bucketing as _compiled
except ImportError:
    _compiled = None

HAVE_COMPILED = _compiled is not None

if HAVE_COMPILED:
    bucket_ids = _compiled.bucket_ids
    pool_contiguous = _compiled.pool_contiguous
else:
    bucket_ids = fallback.bucket_ids
    pool_contiguous = fallback.pool_contiguous


def implementations():
    """(name, module) pairs for benchmarking and equivalence tests."""
    out = [("fallback", fallback)]
    if HAVE_COMPILED:
        out.insert(0, ("compiled", _compiled))
    return out
