import numpy as np
import numpy.testing as npt
import pytest

from batchnorm import (
    BnParams,
    BnStats,
    StatsSource,
    bn_accumulate_stats,
    bn_backward,
    bn_backward_intermediates,
    bn_fold,
    bn_forward_inference,
    bn_forward_train,
    bn_update_ema,
)
from helpers.errors import BatchTooSmallError, ConfigError, DimensionError, NumericError, StateError
from helpers.gradcheck import numerical_gradient, relative_error
from nn import affine_backward, affine_forward
from tensor import Tensor


def column(*values):
    return np.array(values, dtype=np.float64).reshape(-1, 1)


def frozen_stats(mean, var, batch_size=None) -> BnStats:
    empty = BnStats.empty(len(mean))
    return BnStats(Tensor(mean), Tensor(var), empty.ema_mean, empty.ema_var, batches_seen=1,
                   batch_size=batch_size)


def test_forward_train_hand_example():
    y, cache = bn_forward_train(column(1, 2, 3), BnParams([1.0], [0.0]), eps=1e-8)
    npt.assert_allclose(cache.mu_b.data, [2.0])
    npt.assert_allclose(cache.sigma2_b.data, [2.0 / 3.0])
    npt.assert_allclose(y.data.ravel(), [-1.224744, 0.0, 1.224744], atol=1e-6)

    y, _ = bn_forward_train(column(1, 2, 3), BnParams([2.0], [1.0]), eps=1e-8)
    npt.assert_allclose(y.data.ravel(), [-1.449490, 1.0, 3.449490], atol=1e-6)


def test_forward_train_constant_batch_returns_beta():
    y, cache = bn_forward_train(column(4, 4, 4), BnParams([3.0], [-0.25]))
    npt.assert_array_equal(cache.x_hat.data, np.zeros((3, 1)))
    npt.assert_array_equal(y.data, np.full((3, 1), -0.25))


def test_forward_train_errors():
    params = BnParams([1.0], [0.0])
    with pytest.raises(BatchTooSmallError):
        bn_forward_train(column(1.0), params)
    with pytest.raises(ConfigError):
        bn_forward_train(column(1, 2), params, eps=0.0)
    with pytest.raises(NumericError):
        bn_forward_train(column(1.0, np.inf), params)
    with pytest.raises(DimensionError):
        bn_forward_train(np.ones((3, 2)), params)


def test_normalized_columns_have_zero_mean_and_expected_second_moment(rng):
    eps = 1e-5
    for _ in range(100):
        m, d = int(rng.integers(2, 17)), int(rng.integers(1, 9))
        x = rng.normal(size=(m, d)) * rng.uniform(0.5, 5.0) + rng.normal()
        _, cache = bn_forward_train(x, BnParams.identity(d), eps)
        x_hat, sigma2 = cache.x_hat.data, cache.sigma2_b.data
        assert np.all(np.abs(x_hat.sum(axis=0)) <= 1e-9 * m)
        npt.assert_allclose((x_hat ** 2).mean(axis=0), sigma2 / (sigma2 + eps), atol=1e-9)


def test_cache_reproduces_x_hat(rng):
    x = rng.normal(size=(6, 3))
    _, cache = bn_forward_train(x, BnParams.identity(3))
    recomputed = (cache.input.data - cache.mu_b.data) / np.sqrt(cache.sigma2_b.data + cache.eps)
    npt.assert_allclose(recomputed, cache.x_hat.data, atol=1e-12)


def test_gamma_and_beta_can_restore_the_identity(rng):
    x = rng.normal(size=(8, 4)) * 3.0 + 1.0
    _, cache = bn_forward_train(x, BnParams.identity(4))
    gamma = np.sqrt(cache.sigma2_b.data + cache.eps)
    y, _ = bn_forward_train(x, BnParams(gamma, cache.mu_b.data))
    npt.assert_allclose(y.data, x, atol=1e-9)


def test_backward_zero_and_ones_cotangent(rng):
    x = rng.normal(size=(5, 3))
    params = BnParams(rng.normal(size=3), rng.normal(size=3))
    _, cache = bn_forward_train(x, params)

    dx, dgamma, dbeta = bn_backward(cache, np.zeros((5, 3)), params)
    for grad in (dx, dgamma, dbeta):
        assert not np.any(grad.data)

    _, _, dbeta = bn_backward(cache, np.ones((5, 3)), params)
    npt.assert_array_equal(dbeta.data, [5.0, 5.0, 5.0])


def test_backward_matches_finite_differences(rng):
    x = rng.normal(size=(5, 3)) * 2.0
    gamma, beta = rng.normal(size=3), rng.normal(size=3)
    dy = rng.normal(size=(5, 3))
    params = BnParams(gamma, beta)
    _, cache = bn_forward_train(x, params)
    dx, dgamma, dbeta = bn_backward(cache, dy, params)

    def loss(v, g=gamma, b=beta, inputs=None):
        out, _ = bn_forward_train(v if inputs is None else inputs, BnParams(g, b))
        return float(np.sum(dy * out.data))

    assert relative_error(dx.data, numerical_gradient(loss, x)) < 1e-6
    assert relative_error(dgamma.data, numerical_gradient(lambda g: loss(None, g=g, inputs=x), gamma)) < 1e-6
    assert relative_error(dbeta.data, numerical_gradient(lambda b: loss(None, b=b, inputs=x), beta)) < 1e-6


def test_backward_equals_the_simplified_closed_form(rng):
    m = 7
    x = rng.normal(size=(m, 4))
    params = BnParams(rng.normal(size=4), rng.normal(size=4))
    dy = rng.normal(size=(m, 4))
    _, cache = bn_forward_train(x, params)
    grads = bn_backward_intermediates(cache, dy, params)

    inv_std = 1.0 / np.sqrt(cache.sigma2_b.data + cache.eps)
    x_hat = cache.x_hat.data
    fused = params.gamma.data * inv_std / m * (m * dy - dy.sum(axis=0) - x_hat * (dy * x_hat).sum(axis=0))
    npt.assert_allclose(grads.dx.data, fused, atol=1e-10)
    npt.assert_allclose(grads.dx_hat.data, dy * params.gamma.data)


@pytest.mark.parametrize("a", [0.1, 10.0])
def test_scale_invariance_of_forward_and_backward(rng, a):
    eps = 1e-14
    for _ in range(20):
        m, d_in, d_out = rng.integers(4, 17), rng.integers(2, 9), rng.integers(1, 9)
        u = rng.normal(size=(m, d_in))
        W = rng.normal(size=(d_in, d_out))
        dy = rng.normal(size=(m, d_out))
        params = BnParams(rng.normal(size=d_out), rng.normal(size=d_out))

        def forward_backward(weights):
            z, affine_cache = affine_forward(u, weights)
            y, bn_cache = bn_forward_train(z, params, eps)
            dz, _, _ = bn_backward(bn_cache, dy, params)
            du, dW, _ = affine_backward(affine_cache, dz)
            return y.data, du.data, dW.data

        y, du, dW = forward_backward(W)
        y_scaled, du_scaled, dW_scaled = forward_backward(W * a)
        npt.assert_allclose(y_scaled, y, rtol=1e-7, atol=1e-9)
        npt.assert_allclose(du_scaled, du, rtol=1e-7, atol=1e-9)
        assert relative_error(dW_scaled, dW / a) < 1e-7


def test_accumulate_one_batch():
    stats = bn_accumulate_stats((Tensor([2.0]), Tensor([2.0 / 3.0]), 3), BnStats.empty(1))
    npt.assert_allclose(stats.mean.data, [2.0])
    npt.assert_allclose(stats.var.data, [1.0])
    npt.assert_allclose(stats.uncorrected_var.data, [2.0 / 3.0])
    assert stats.frozen and stats.batches_seen == 1 and stats.batch_size == 3


def test_accumulate_identical_batches_is_idempotent():
    batch = (Tensor([1.0, -2.0]), Tensor([0.5, 4.0]), 4)
    once = bn_accumulate_stats(batch, BnStats.empty(2))
    twice = bn_accumulate_stats(batch, once)
    npt.assert_allclose(twice.mean.data, once.mean.data)
    npt.assert_allclose(twice.var.data, once.var.data)
    assert twice.batches_seen == 2


def test_accumulate_rejects_mixed_batch_sizes():
    stats = bn_accumulate_stats((Tensor([0.0]), Tensor([1.0]), 4), BnStats.empty(1))
    with pytest.raises(ConfigError):
        bn_accumulate_stats((Tensor([0.0]), Tensor([1.0]), 5), stats)


def test_accumulated_variance_is_unbiased(rng):
    m, batches = 10, 10000
    stats = BnStats.empty(1)
    for _ in range(batches):
        x = rng.normal(5.0, 3.0, size=(m, 1))
        stats = bn_accumulate_stats((Tensor(x.mean(axis=0)), Tensor(x.var(axis=0)), m), stats)
    mean_se = np.sqrt(9.0 / m / batches)
    var_se = np.sqrt(2 * 81.0 / (m - 1) / batches)
    assert abs(stats.mean.item() - 5.0) < 3 * mean_se
    assert abs(stats.var.item() - 9.0) < 3 * var_se
    # the plain average of biased variances sits at 9 * (m - 1) / m
    assert abs(stats.uncorrected_var.item() - 8.1) < 3 * var_se


def test_ema_updates():
    stats = bn_update_ema(BnStats.empty(1), Tensor([1.0]), Tensor([0.0]), 2, decay=0.9)
    npt.assert_allclose(stats.ema_mean.data, [0.1])
    assert stats.ema_updates == 1

    fixed = BnStats(Tensor([3.0]), Tensor([1.0]), Tensor([3.0]), Tensor([2.0]), ema_updates=5)
    same = bn_update_ema(fixed, Tensor([3.0]), Tensor([1.0]), 2)
    npt.assert_allclose(same.ema_mean.data, [3.0])
    npt.assert_allclose(same.ema_var.data, [2.0])


def test_ema_converges_to_constant_input():
    stats = BnStats.empty(2)
    for _ in range(200):
        stats = bn_update_ema(stats, Tensor([4.0, -1.0]), Tensor([0.75, 0.0]), 4, decay=0.9)
    npt.assert_allclose(stats.ema_mean.data, [4.0, -1.0], atol=1e-6)
    npt.assert_allclose(stats.ema_var.data, [1.0, 0.0], atol=1e-6)


@pytest.mark.parametrize("decay", [0.0, 1.0, -0.5, 1.5])
def test_ema_decay_must_lie_in_open_unit_interval(decay):
    with pytest.raises(ConfigError):
        bn_update_ema(BnStats.empty(1), Tensor([1.0]), Tensor([1.0]), 2, decay=decay)


def test_inference_examples():
    eps = 1e-5
    x = np.array([[0.3, -2.0], [1.5, 0.0]])
    y = bn_forward_inference(x, BnParams.identity(2), frozen_stats([0.0, 0.0], [1.0 - eps, 1.0 - eps]), eps)
    npt.assert_allclose(y.data, x, rtol=1e-12)

    y = bn_forward_inference(column(7.0), BnParams([3.0], [2.0]), frozen_stats([5.0], [4.0]), eps=0.0)
    npt.assert_array_equal(y.data, [[5.0]])


def test_inference_row_does_not_depend_on_batch(rng):
    params = BnParams(rng.normal(size=3), rng.normal(size=3))
    stats = frozen_stats(rng.normal(size=3), rng.uniform(0.5, 2.0, size=3))
    x = rng.normal(size=(9, 3))
    batch = bn_forward_inference(x, params, stats).data
    for i in range(len(x)):
        npt.assert_array_equal(bn_forward_inference(x[i:i + 1], params, stats).data[0], batch[i])


def test_inference_needs_statistics():
    with pytest.raises(StateError):
        bn_forward_inference(column(1.0), BnParams.identity(1), BnStats.empty(1))
    with pytest.raises(StateError):
        bn_forward_inference(column(1.0), BnParams.identity(1), frozen_stats([0.0], [1.0]),
                             source=StatsSource.EMA)


def test_fold_examples():
    folded = bn_fold(BnParams([3.0], [2.0]), frozen_stats([5.0], [4.0]), eps=0.0)
    npt.assert_allclose(folded.scale.data, [1.5])
    npt.assert_allclose(folded.shift.data, [-5.5])

    eps = 1e-5
    folded = bn_fold(BnParams.identity(2), frozen_stats([0.0, 0.0], [1.0 - eps, 1.0 - eps]), eps)
    npt.assert_allclose(folded.scale.data, [1.0, 1.0], rtol=1e-12)
    npt.assert_array_equal(folded.shift.data, [0.0, 0.0])


@pytest.mark.parametrize("source", list(StatsSource))
def test_fold_matches_inference(rng, source):
    d = 5
    params = BnParams(rng.normal(size=d), rng.normal(size=d))
    stats = BnStats(Tensor(rng.normal(size=d)), Tensor(rng.uniform(0.1, 3.0, size=d)),
                    Tensor(rng.normal(size=d)), Tensor(rng.uniform(0.1, 3.0, size=d)),
                    batches_seen=3, ema_updates=3, batch_size=8)
    x = rng.normal(size=(11, d)) * 2.0
    folded = bn_fold(params, stats, source=source)
    expected = bn_forward_inference(x, params, stats, source=source)
    npt.assert_allclose(folded.apply(Tensor(x)).data, expected.data, atol=1e-12)
