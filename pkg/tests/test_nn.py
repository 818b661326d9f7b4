"""Tests for the autodiff substrate: tensors, layers, Adam, and gradient checks."""

import numpy as np
import pytest

import loadcast.nn.autodiff as ad
from loadcast.errors import ConfigError, NumericError, ShapeError, StateError
from loadcast.nn import (
    Param,
    ParamStore,
    Tensor,
    adam_update,
    conv_pool_forward,
    glorot_init,
    grad_check,
    layer_norm,
    no_grad,
    residual_wrap,
)
from loadcast.nn.adam import BETA1, BETA2, EPSILON


def _numeric_grad(fn, x, h=1e-6):
    """Central-difference gradient of a scalar function of one array."""
    grad = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = grad.ravel()
    for i in range(flat_x.size):
        keep = flat_x[i]
        flat_x[i] = keep + h
        up = fn(x)
        flat_x[i] = keep - h
        down = fn(x)
        flat_x[i] = keep
        flat_g[i] = (up - down) / (2.0 * h)
    return grad


def _check_op(build, shape, seed, atol=1e-6):
    """Compare the backward pass against central differences for one op."""
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, 1.0, size=shape)
    t = Tensor(x.copy(), requires_grad=True)
    out = build(t)
    loss = ad.tsum(ad.mul(out, out))
    loss.backward()

    def scalar(arr):
        val = build(Tensor(arr.copy())).value
        return float(np.sum(val * val))

    np.testing.assert_allclose(t.grad, _numeric_grad(scalar, x), atol=atol)


def test_elementwise_op_gradients():
    for seed, build in enumerate(
        [
            lambda t: ad.add(t, 2.0),
            lambda t: ad.sub(3.0, t),
            lambda t: ad.mul(t, -1.5),
            lambda t: ad.scale(t, 0.3),
            ad.relu,
            ad.sigmoid,
            ad.tanh,
            ad.exp,
        ]
    ):
        _check_op(build, (4, 3), seed)


def test_log_gradient_on_positive_input():
    rng = np.random.default_rng(0)
    x = rng.uniform(0.5, 2.0, size=(3, 3))
    t = Tensor(x.copy(), requires_grad=True)
    ad.tsum(ad.log(t)).backward()
    np.testing.assert_allclose(t.grad, 1.0 / x, atol=1e-12)


def test_matmul_gradients():
    rng = np.random.default_rng(2)
    a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    loss = ad.tsum(ad.matmul(a, b))
    loss.backward()
    np.testing.assert_allclose(a.grad, np.ones((4, 5)) @ b.value.T, atol=1e-12)
    np.testing.assert_allclose(b.grad, a.value.T @ np.ones((4, 5)), atol=1e-12)


def test_broadcast_gradient_folds_back():
    """A (1, n) bias added to an (m, n) matrix accumulates over rows."""
    bias = Tensor(np.zeros((1, 4)), requires_grad=True)
    x = Tensor(np.ones((5, 4)))
    ad.tsum(ad.add(x, bias)).backward()
    np.testing.assert_array_equal(bias.grad, np.full((1, 4), 5.0))


def test_reduction_and_shape_op_gradients():
    _check_op(lambda t: ad.tsum(t, axis=0, keepdims=True), (4, 3), 10)
    _check_op(lambda t: ad.mean(t, axis=1, keepdims=True), (4, 3), 11)
    _check_op(lambda t: ad.reshape(t, (3, 4)), (4, 3), 12)
    _check_op(lambda t: ad.transpose(t, (1, 0)), (4, 3), 13)
    _check_op(lambda t: ad.concat([t, ad.mul(t, 2.0)], axis=-1), (4, 3), 14)


def test_softmax_rows_sum_to_one_and_grad():
    rng = np.random.default_rng(3)
    x = rng.normal(0.0, 2.0, size=(6, 5))
    out = ad.softmax(Tensor(x))
    np.testing.assert_allclose(out.value.sum(axis=-1), np.ones(6), atol=1e-12)
    _check_op(ad.softmax, (4, 5), 15)


def test_softmax_mask_zeroes_banned_positions():
    x = np.zeros((2, 3, 3))
    keep = np.tril(np.ones((3, 3), dtype=bool))  # True = may attend
    out = ad.softmax(Tensor(x), mask=keep).value
    assert np.all(out[:, ~keep] == 0.0)
    np.testing.assert_allclose(out.sum(axis=-1), np.ones((2, 3)), atol=1e-12)
    # row 0 can only attend to itself
    np.testing.assert_allclose(out[:, 0, 0], np.ones(2), atol=1e-12)


def test_layer_norm_statistics_and_grad():
    rng = np.random.default_rng(4)
    x = rng.normal(3.0, 2.5, size=(7, 8))
    gamma = Tensor(np.ones((1, 8)))
    beta = Tensor(np.zeros((1, 8)))
    out = ad.layer_norm(Tensor(x), gamma, beta).value
    np.testing.assert_allclose(out.mean(axis=-1), np.zeros(7), atol=1e-9)
    np.testing.assert_allclose(out.var(axis=-1), np.ones(7), atol=1e-4)
    g6, b6 = Tensor(np.ones((1, 6))), Tensor(np.zeros((1, 6)))
    _check_op(lambda t: ad.layer_norm(t, g6, b6), (5, 6), 16, atol=1e-5)


def test_layer_norm_affine_parameters_receive_gradients():
    rng = np.random.default_rng(5)
    x = Tensor(rng.normal(size=(4, 6)))
    gamma = Tensor(rng.normal(size=(1, 6)), requires_grad=True)
    beta = Tensor(rng.normal(size=(1, 6)), requires_grad=True)
    ad.tsum(ad.layer_norm(x, gamma, beta)).backward()
    assert gamma.grad is not None and np.any(gamma.grad != 0.0)
    np.testing.assert_allclose(beta.grad, np.full((1, 6), 4.0), atol=1e-12)


def test_conv1d_same_known_values():
    """[1,2,3] filtered by [0,1,1] under zero padding gives [3,5,3]."""
    x = Tensor(np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1))
    w = Tensor(np.array([0.0, 1.0, 1.0]).reshape(3, 1, 1))
    b = Tensor(np.zeros((1, 1)))
    out = ad.conv1d_same(x, w, b).value
    np.testing.assert_allclose(out.ravel(), [3.0, 5.0, 3.0], atol=1e-12)


def test_conv_and_pool_gradients():
    rng = np.random.default_rng(6)
    w = Tensor(rng.normal(size=(3, 2, 2)))
    b = Tensor(rng.normal(size=(1, 2)))
    _check_op(lambda t: ad.conv1d_same(t, w, b), (2, 6, 2), 17, atol=1e-5)
    _check_op(lambda t: ad.conv1d_same(t, w, b, causal=True), (2, 6, 2), 18, atol=1e-5)
    _check_op(lambda t: ad.maxpool1d_same(t, 3), (2, 7, 2), 19, atol=1e-5)
    _check_op(lambda t: ad.maxpool1d_same(t, 3, causal=True), (2, 7, 2), 20, atol=1e-5)


def test_causal_conv_ignores_the_future():
    rng = np.random.default_rng(7)
    w = Tensor(rng.normal(size=(3, 1, 1)))
    b = Tensor(np.zeros((1, 1)))
    x = rng.normal(size=(1, 8, 1))
    y = x.copy()
    y[0, 5:, 0] += 10.0
    out_x = ad.conv1d_same(Tensor(x), w, b, causal=True).value
    out_y = ad.conv1d_same(Tensor(y), w, b, causal=True).value
    np.testing.assert_array_equal(out_x[0, :5, 0], out_y[0, :5, 0])
    pool_x = ad.maxpool1d_same(Tensor(x), 3, causal=True).value
    pool_y = ad.maxpool1d_same(Tensor(y), 3, causal=True).value
    np.testing.assert_array_equal(pool_x[0, :5, 0], pool_y[0, :5, 0])


def test_mse_matches_definition():
    rng = np.random.default_rng(8)
    p = rng.normal(size=(5, 3))
    t = rng.normal(size=(5, 3))
    out = ad.mse(Tensor(p), t)
    np.testing.assert_allclose(out.value, np.mean((p - t) ** 2), atol=1e-12)
    pred = Tensor(p.copy(), requires_grad=True)
    ad.mse(pred, t).backward()
    np.testing.assert_allclose(pred.grad, 2.0 * (p - t) / p.size, atol=1e-12)


def test_no_grad_blocks_graph_building():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with no_grad():
        out = ad.mul(x, 3.0)
    assert out._parents == ()
    y = ad.mul(x, 3.0)
    assert y._parents != ()


def test_backward_survives_very_deep_chains():
    """The iterative traversal must not hit the recursion limit."""
    x = Tensor(np.array([[1.0]]), requires_grad=True)
    out = x
    for _ in range(5000):
        out = ad.add(out, 1.0)
    ad.tsum(out).backward()
    np.testing.assert_allclose(x.grad, [[1.0]])


def test_operator_sugar():
    a = Tensor(np.array([[2.0]]), requires_grad=True)
    b = Tensor(np.array([[3.0]]), requires_grad=True)
    out = a * b + (-a)
    ad.tsum(out).backward()
    np.testing.assert_allclose(a.grad, [[2.0]])
    np.testing.assert_allclose(b.grad, [[2.0]])


def test_polymorphic_ops_return_plain_arrays_for_plain_inputs():
    x = np.random.default_rng(9).normal(size=(3, 4))
    gamma, beta = np.ones((1, 4)), np.zeros((1, 4))
    out = layer_norm(x, gamma, beta)
    assert isinstance(out, np.ndarray)
    assert isinstance(layer_norm(Tensor(x), Tensor(gamma), Tensor(beta)), Tensor)


def test_residual_wrap_identity_and_shape_guard():
    x = np.random.default_rng(10).normal(size=(4, 5))
    np.testing.assert_array_equal(residual_wrap(np.zeros_like(x), x), x)
    with pytest.raises(ShapeError):
        residual_wrap(np.zeros((4, 4)), x)


def test_conv_pool_forward_preserves_length():
    rng = np.random.default_rng(11)
    for seed in range(4):
        t = int(np.random.default_rng(seed).integers(4, 12))
        x = rng.normal(size=(2, t, 3))
        w = rng.normal(size=(3, 3, 3))
        b = rng.normal(size=(1, 3))
        out = conv_pool_forward(x, w, b, pool_range=3)
        assert out.shape == (2, t, 3)
        lin = conv_pool_forward(x, w, b, pool_range=3, activation="linear")
        assert lin.shape == (2, t, 3)
    with pytest.raises(ConfigError):
        conv_pool_forward(x, w, b, pool_range=3, activation="softplus")


def test_param_store_round_trip_and_hash(tmp_path):
    rng = np.random.default_rng(12)
    store = ParamStore()
    store.add("layer.w", rng.normal(size=(4, 3)))
    store.add("layer.b", np.zeros((1, 3)))
    digest = store.state_hash()
    path = str(tmp_path / "weights.bin")
    store.save(path)
    loaded = ParamStore.load(path)
    assert loaded.state_hash() == digest
    np.testing.assert_array_equal(loaded.get("layer.w").value, store.get("layer.w").value)
    store.get("layer.w").value[0, 0] += 1.0
    assert store.state_hash() != digest


def test_param_store_rejects_shape_mismatch_on_load():
    a = ParamStore()
    a.add("w", np.zeros((2, 2)))
    b = ParamStore()
    b.add("w", np.zeros((3, 2)))
    with pytest.raises(ShapeError):
        a.load_values_from(b)


def test_glorot_init_scale():
    rng = np.random.default_rng(13)
    w = glorot_init(rng, 400, 400, (400, 400))
    bound = np.sqrt(6.0 / 800.0)
    assert float(np.max(np.abs(w))) <= bound + 1e-12
    assert float(np.std(w)) > 0.3 * bound


def test_adam_update_matches_hand_computation():
    store = ParamStore()
    store.add("w", np.array([[1.0, -2.0]]))
    p = store.get("w")
    grad = np.array([[0.5, -1.5]])
    p.grad[...] = grad
    adam_update(store, learning_rate=0.1, step=1)
    m = (1 - BETA1) * grad / (1 - BETA1)
    v = (1 - BETA2) * grad**2 / (1 - BETA2)
    expected = np.array([[1.0, -2.0]]) - 0.1 * m / (np.sqrt(v) + EPSILON)
    np.testing.assert_allclose(p.value, expected, atol=1e-12)
    np.testing.assert_array_equal(p.grad, np.zeros((1, 2)))


def test_adam_two_steps_track_moments():
    store = ParamStore()
    store.add("w", np.array([[0.0]]))
    p = store.get("w")
    m = v = 0.0
    value = 0.0
    for step in (1, 2):
        g = float(step)
        p.grad[...] = g
        adam_update(store, learning_rate=0.01, step=step)
        m = BETA1 * m + (1 - BETA1) * g
        v = BETA2 * v + (1 - BETA2) * g * g
        mh = m / (1 - BETA1**step)
        vh = v / (1 - BETA2**step)
        value -= 0.01 * mh / (np.sqrt(vh) + EPSILON)
    np.testing.assert_allclose(p.value, [[value]], atol=1e-15)


def test_adam_guards():
    store = ParamStore()
    store.add("w", np.zeros((1, 1)))
    with pytest.raises(ConfigError):
        adam_update(store, learning_rate=0.0, step=1)
    with pytest.raises(ConfigError):
        adam_update(store, learning_rate=0.1, step=0)
    store.get("w").grad[...] = np.inf
    with pytest.raises(NumericError) as err:
        adam_update(store, learning_rate=0.1, step=1)
    assert "w" in str(err.value)


def test_grad_check_accepts_correct_gradients():
    rng = np.random.default_rng(14)
    store = ParamStore()
    store.add("w", rng.normal(size=(3, 2)))
    store.add("b", rng.normal(size=(1, 2)))
    x = rng.normal(size=(6, 3))
    t = rng.normal(size=(6, 2))

    def forward():
        out = ad.add(ad.matmul(Tensor(x), store.tensor("w")), store.tensor("b"))
        return ad.mse(ad.tanh(out), t)

    assert grad_check(forward, store, probe_count=12, rng=np.random.default_rng(0)) < 1e-6


def test_grad_check_flags_an_inconsistent_model():
    """A forward pass whose probe-time loss disagrees with its gradient must fail."""
    rng = np.random.default_rng(15)
    store = ParamStore()
    store.add("w", rng.normal(size=(3, 3)))
    x = rng.normal(size=(5, 3))

    def forward():
        out = ad.matmul(Tensor(x), store.tensor("w"))
        if not ad.grad_enabled():
            out = ad.scale(out, 1.1)  # finite differences see a warped loss
        return ad.mse(out, np.zeros((5, 3)))

    assert grad_check(forward, store, probe_count=9, rng=np.random.default_rng(1)) > 1e-2


def test_param_requires_two_dimensional_values():
    with pytest.raises(ShapeError):
        Param("w", np.zeros(3))
    store = ParamStore()
    store.add("a", np.zeros((2, 2)))
    with pytest.raises(StateError):
        store.add("a", np.zeros((2, 2)))
    assert store.parameter_count() == 4
