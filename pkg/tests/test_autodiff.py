import numpy as np
import pytest

from anchorsum import autodiff as ad


def _fd(fn, x, i, eps=1e-6):
    xp = x.copy(); xp.flat[i] += eps
    xm = x.copy(); xm.flat[i] -= eps
    return (fn(xp) - fn(xm)) / (2 * eps)


def _check_grad(build, x0, n_checks=6, tol=1e-6, seed=0):
    """Compare analytic gradients with central differences on random entries."""
    rng = np.random.default_rng(seed)
    t = ad.Tensor(x0, requires_grad=True)
    out = build(t)
    out.backward()
    for i in rng.integers(0, x0.size, size=n_checks):
        fd = _fd(lambda x: float(build(ad.Tensor(x)).data), x0, i)
        an = t.grad.flat[i]
        assert abs(fd - an) <= tol * max(1.0, abs(fd)), (i, fd, an)


class TestOps:
    def test_add_mul_broadcast(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal(4)
        _check_grad(lambda t: ad.tsum(ad.mul(ad.add(t, ad.Tensor(b)), ad.Tensor(a))), a)
        tb = ad.Tensor(b, requires_grad=True)
        out = ad.tsum(ad.add(ad.Tensor(a), tb))
        out.backward()
        assert tb.grad.shape == (4,)
        np.testing.assert_allclose(tb.grad, np.full(4, 3.0))

    def test_matmul_grads(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((3, 5))
        b = rng.standard_normal((5, 2))
        _check_grad(lambda t: ad.tsum(ad.matmul(t, ad.Tensor(b))), a)
        _check_grad(lambda t: ad.tsum(ad.matmul(ad.Tensor(a), t)), b)

    def test_batched_matmul(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((4, 3, 5))
        b = rng.standard_normal((4, 5, 2))
        _check_grad(lambda t: ad.tsum(ad.matmul(t, ad.Tensor(b))), a)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        for shape in ((5, 7), (2, 3, 4)):
            s = ad.softmax(ad.Tensor(rng.standard_normal(shape) * 10), axis=-1)
            np.testing.assert_allclose(s.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_softmax_grad(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((3, 6))
        w = rng.standard_normal((3, 6))
        _check_grad(lambda t: ad.tsum(ad.mul(ad.softmax(t, axis=-1), ad.Tensor(w))), x)

    def test_layer_norm_grad_all_groups(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((4, 8))
        g = rng.standard_normal(8)
        b = rng.standard_normal(8)
        w = rng.standard_normal((4, 8))
        _check_grad(lambda t: ad.tsum(ad.mul(ad.layer_norm(t, ad.Tensor(g), ad.Tensor(b)), ad.Tensor(w))), x, tol=1e-5)
        _check_grad(lambda t: ad.tsum(ad.mul(ad.layer_norm(ad.Tensor(x), t, ad.Tensor(b)), ad.Tensor(w))), g)
        _check_grad(lambda t: ad.tsum(ad.mul(ad.layer_norm(ad.Tensor(x), ad.Tensor(g), t), ad.Tensor(w))), b)

    def test_embedding_scatter(self):
        w = np.zeros((5, 3))
        t = ad.Tensor(w, requires_grad=True)
        out = ad.tsum(ad.embedding(t, [1, 1, 4]))
        out.backward()
        expected = np.zeros((5, 3))
        expected[1] = 2.0
        expected[4] = 1.0
        np.testing.assert_array_equal(t.grad, expected)

    def test_token_nll_matches_manual(self):
        rng = np.random.default_rng(6)
        logits = rng.standard_normal((4, 7))
        targets = [1, 0, 6, 3]
        nll = ad.token_nll(ad.Tensor(logits), targets)
        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        manual = -np.log(probs[np.arange(4), targets])
        np.testing.assert_allclose(nll.data, manual, atol=1e-12)
        _check_grad(lambda t: ad.tsum(ad.token_nll(t, targets)), logits, tol=1e-5)

    def test_segment_mean_grad_distributes(self):
        from anchorsum._kernels import fallback

        x = np.arange(12, dtype=float).reshape(6, 2)
        t = ad.Tensor(x, requires_grad=True)
        out = ad.segment_mean(t, [0, 0, 1, 1, 1, 2], 3, fallback.pool_contiguous)
        w = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        ad.tsum(ad.mul(out, ad.Tensor(w))).backward()
        expected = np.array([w[0] / 2, w[0] / 2, w[1] / 3, w[1] / 3, w[1] / 3, w[2]])
        np.testing.assert_allclose(t.grad, expected)

    def test_concat_and_slice(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((2, 3))
        _check_grad(lambda t: ad.tsum(ad.concat([t, ad.Tensor(a)], axis=0)), a)
        _check_grad(lambda t: ad.tsum(ad.reshape(ad.transpose(t, (1, 0)), (6,))), a)


class TestEngine:
    def test_backward_needs_scalar(self):
        t = ad.Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            t.backward()

    def test_unreached_nodes_keep_no_grad(self):
        a = ad.Tensor(np.ones(2), requires_grad=True)
        b = ad.Tensor(np.ones(2), requires_grad=True)
        ad.tsum(ad.mul(a, 2.0)).backward()
        assert b.grad is None
        np.testing.assert_array_equal(a.grad, np.full(2, 2.0))

    def test_grad_accumulates_on_reuse(self):
        a = ad.Tensor(np.array([3.0]), requires_grad=True)
        out = ad.tsum(ad.add(ad.mul(a, 2.0), ad.mul(a, 5.0)))
        out.backward()
        np.testing.assert_allclose(a.grad, [7.0])

    def test_no_grad_skips_tape(self):
        a = ad.Tensor(np.ones(3), requires_grad=True)
        with ad.no_grad():
            out = ad.mul(a, 2.0)
        assert out._backward is None and not out.requires_grad

    def test_linearity_of_backward(self):
        # doubling the scalar doubles every gradient entry
        rng = np.random.default_rng(9)
        x = rng.standard_normal((3, 3))
        t1 = ad.Tensor(x, requires_grad=True)
        ad.tsum(ad.softmax(t1, axis=-1) * ad.Tensor(x)).backward()
        t2 = ad.Tensor(x, requires_grad=True)
        (ad.tsum(ad.softmax(t2, axis=-1) * ad.Tensor(x)) * 2.0).backward()
        np.testing.assert_allclose(t2.grad, 2 * t1.grad, atol=1e-12)
