"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 ndarray and records a closure that propagates the
output gradient to its parents. backward() on a scalar runs the tape in
reverse topological order, so gradients are exact (no approximations), which
is what the attention-attribution path needs: the post-softmax weight matrix
is an ordinary node and its .grad is d(scalar)/d(weights).

Only the ops the encoder-decoder needs are implemented. Ops executed under
no_grad(), or whose inputs all have requires_grad=False, skip tape recording
entirely, so inference and benchmarking run at plain numpy speed.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._parents = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Reverse-mode sweep from a scalar node."""
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar output")
        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad:
                    stack.append((p, False))
        self.accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not on the tape; use reciprocal scalars")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum gradient g down to the given broadcast-source shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a.accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b.accumulate(_unbroadcast(gb, b.data.shape))

    return _make(data, (a, b), backward)


def transpose(a, axes):
    a = as_tensor(a)
    inv = np.argsort(axes)

    def backward(g):
        a.accumulate(g.transpose(inv))

    return _make(a.data.transpose(axes), (a,), backward)


def reshape(a, shape):
    a = as_tensor(a)
    src = a.data.shape

    def backward(g):
        a.accumulate(g.reshape(src))

    return _make(a.data.reshape(shape), (a,), backward)


def concat(parts, axis=0):
    parts = [as_tensor(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, start, stop in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(start, stop)
                p.accumulate(g[tuple(sl)])

    return _make(np.concatenate([p.data for p in parts], axis=axis), parts, backward)


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            a.accumulate(np.broadcast_to(g, a.data.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate(np.broadcast_to(g, a.data.shape).copy())

    return _make(data, (a,), backward)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0

    def backward(g):
        a.accumulate(g * mask)

    return _make(a.data * mask, (a,), backward)


def log(a):
    a = as_tensor(a)

    def backward(g):
        a.accumulate(g / a.data)

    return _make(np.log(a.data), (a,), backward)


def exp(a):
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward(g):
        a.accumulate(g * data)

    return _make(data, (a,), backward)


def softmax(a, axis=-1):
    """Max-subtracted softmax; rows along the chosen axis sum to 1."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * p).sum(axis=axis, keepdims=True)
        a.accumulate(p * (g - dot))

    return _make(p, (a,), backward)


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalize over the last axis, then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    data = xhat * gain.data + bias.data

    def backward(g):
        if gain.requires_grad:
            gain.accumulate(_unbroadcast(g * xhat, gain.data.shape))
        if bias.requires_grad:
            bias.accumulate(_unbroadcast(g, bias.data.shape))
        if x.requires_grad:
            gx = g * gain.data
            mean_gx = gx.mean(axis=-1, keepdims=True)
            mean_gx_xhat = (gx * xhat).mean(axis=-1, keepdims=True)
            x.accumulate(inv * (gx - mean_gx - xhat * mean_gx_xhat))

    return _make(data, (x, gain, bias), backward)


def embedding(weight, ids):
    """Row gather; gradient scatter-adds back into the table."""
    weight = as_tensor(weight)
    idx = np.asarray(ids, dtype=np.int64)
    data = weight.data[idx]

    def backward(g):
        gw = np.zeros_like(weight.data)
        np.add.at(gw, idx, g)
        weight.accumulate(gw)

    return _make(data, (weight,), backward)


def token_nll(logits, targets):
    """Per-position negative log-likelihood of the target ids.

    logits: [T, V]; targets: int array [T]. Returns a length-T vector node.
    """
    logits = as_tensor(logits)
    tgt = np.asarray(targets, dtype=np.int64)
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    rows = np.arange(tgt.shape[0])
    data = -logp[rows, tgt]

    def backward(g):
        p = np.exp(logp)
        gl = p * g[:, None]
        gl[rows, tgt] -= g
        logits.accumulate(gl)

    return _make(data, (logits,), backward)


def segment_mean(x, bucket_of, n_buckets, pool_fn):
    """Mean-pool rows of x into buckets given a non-decreasing bucket id per
    row. pool_fn does the forward reduction (compiled or fallback kernel);
    the gradient of a pooled row distributes equally over its member rows."""
    x = as_tensor(x)
    idx = np.asarray(bucket_of, dtype=np.int64)
    counts = np.bincount(idx, minlength=n_buckets).astype(np.float64)
    data = pool_fn(x.data, idx, n_buckets)

    def backward(g):
        x.accumulate(g[idx] / counts[idx][:, None])

    return _make(data, (x,), backward)
