import numpy as np
import pytest

from kpsign import autodiff as ad
from kpsign.autodiff import Tensor


def finite_difference(fn, tensor, h=1e-6):
    """Central-difference gradient of a scalar-valued fn wrt one tensor."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = float(fn().data)
        flat[i] = orig - h
        down = float(fn().data)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad


def check_grads(fn, tensors, tol=1e-6):
    out = fn()
    ad.backward(out)
    for t in tensors:
        fd = finite_difference(fn, t)
        assert t.grad is not None
        assert np.abs(t.grad - fd).max() < tol, np.abs(t.grad - fd).max()
        t.grad = None


def scalarize(x):
    while x.data.ndim:
        x = ad.mean(x, axis=0)
    return x


rng = np.random.default_rng(42)


def rand_tensor(*shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def test_add_broadcast_grad():
    a = rand_tensor(3, 4)
    b = rand_tensor(4)
    check_grads(lambda: scalarize(ad.add(a, b)), [a, b])


def test_mul_grad():
    a = rand_tensor(2, 3)
    b = rand_tensor(2, 3)
    check_grads(lambda: scalarize(ad.mul(a, b)), [a, b])


def test_mul_scalar_grad():
    a = rand_tensor(3, 2)
    check_grads(lambda: scalarize(ad.mul_scalar(a, 0.37)), [a])


def test_matmul_grad():
    a = rand_tensor(3, 4)
    b = rand_tensor(4, 2)
    check_grads(lambda: scalarize(ad.matmul(a, b)), [a, b])


def test_matmul_batched_weight_broadcast_grad():
    a = rand_tensor(2, 3, 4)
    w = rand_tensor(4, 5)
    check_grads(lambda: scalarize(ad.matmul(a, w)), [a, w])


def test_matmul_4d_grad():
    a = rand_tensor(2, 2, 3, 4)
    b = rand_tensor(2, 2, 4, 3)
    check_grads(lambda: scalarize(ad.matmul(a, b)), [a, b])


def test_reshape_transpose_grad():
    a = rand_tensor(2, 3, 4)
    check_grads(
        lambda: scalarize(ad.reshape(ad.transpose(a, (2, 0, 1)), (4, 6))), [a]
    )


def test_relu_grad():
    a = Tensor(rng.normal(size=(4, 4)) + 0.05, requires_grad=True)
    check_grads(lambda: scalarize(ad.relu(a)), [a])


def test_softmax_grad():
    a = rand_tensor(3, 5)
    w = Tensor(rng.normal(size=(3, 5)))  # weighting makes the objective non-trivial
    check_grads(lambda: scalarize(ad.mul(ad.softmax(a), w)), [a])


def test_softmax_rows_sum_to_one():
    for shape in [(4,), (3, 5), (2, 3, 7), (2, 2, 3, 4)]:
        out = ad.softmax(Tensor(rng.normal(scale=10.0, size=shape)))
        assert np.abs(out.data.sum(axis=-1) - 1.0).max() < 1e-12


def test_mean_grad():
    a = rand_tensor(4, 3)
    check_grads(lambda: scalarize(ad.mean(a, axis=1)), [a])


def test_layer_norm_grad():
    x = rand_tensor(3, 6)
    g = rand_tensor(6)
    b = rand_tensor(6)
    check_grads(lambda: scalarize(ad.layer_norm(x, g, b)), [x, g, b], tol=1e-5)


def test_cross_entropy_grad():
    logits = rand_tensor(5, 7)
    labels = np.array([0, 3, 6, 2, 2])
    check_grads(lambda: ad.cross_entropy_mean(logits, labels), [logits])


def test_dropout_backward_applies_mask():
    x = Tensor(np.ones((100, 10)), requires_grad=True)
    out = ad.dropout(x, 0.4, np.random.default_rng(0))
    kept = out.data != 0
    assert 0.4 < kept.mean() < 0.8
    assert np.allclose(out.data[kept], 1.0 / 0.6)
    ad.backward(scalarize(out))
    assert np.array_equal(x.grad != 0, kept)


def test_dropout_zero_rate_is_identity():
    x = Tensor(np.ones((5, 5)), requires_grad=True)
    assert ad.dropout(x, 0.0, np.random.default_rng(0)) is x


def test_unused_tensor_gets_no_gradient():
    a = rand_tensor(3)
    unused = rand_tensor(3)
    out = scalarize(ad.mul(a, a))
    ad.backward(out)
    assert unused.grad is None
    assert a.grad is not None


def test_doubling_loss_doubles_gradient():
    a = rand_tensor(4, 4)
    loss = scalarize(ad.mul(a, a))
    ad.backward(loss)
    g1 = a.grad.copy()
    a.grad = None
    doubled = ad.mul_scalar(scalarize(ad.mul(a, a)), 2.0)
    ad.backward(doubled)
    assert np.allclose(a.grad, 2.0 * g1)


def test_reused_tensor_accumulates():
    a = rand_tensor(3, 3)
    check_grads(lambda: scalarize(ad.add(ad.mul(a, a), a)), [a])


def test_no_grad_disables_recording():
    a = rand_tensor(2, 2)
    with ad.no_grad():
        out = ad.mul(a, a)
    assert not out.requires_grad
    assert out._backward is None


def test_backward_requires_grad_root():
    with pytest.raises(ValueError):
        ad.backward(Tensor(np.ones(3)))


def test_zero_grads():
    a = rand_tensor(2)
    ad.backward(scalarize(ad.mul(a, a)))
    assert a.grad is not None
    ad.zero_grads([a])
    assert a.grad is None


def test_diamond_graph_grad():
    # x feeds two paths that merge; gradient must sum both.
    x = rand_tensor(3)
    def fn():
        y = ad.mul(x, x)
        z = ad.add(y, x)
        return scalarize(ad.mul(z, y))
    check_grads(fn, [x])
