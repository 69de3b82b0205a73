from typing import NamedTuple, Tuple

from batchnorm.types import DEFAULT_EPS, BnCache, BnParams, BnStats, StatsSource
from helpers.errors import BatchTooSmallError, ConfigError, DimensionError, StateError
from tensor import Tensor, as_tensor, reduce_mean_axis0, reduce_sum_axis0, sqrt


class BnBackward(NamedTuple):
    """ Every intermediate gradient of the backward pass, in evaluation order. """
    dx_hat: Tensor
    dsigma2: Tensor
    dmu: Tensor
    dx: Tensor
    dgamma: Tensor
    dbeta: Tensor


def _check_input(x: Tensor, params: BnParams, op: str) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"{op}: expected an m×d batch, got shape {x.shape}")
    if x.shape[1] != params.dim:
        raise DimensionError(f"{op}: batch {x.shape} does not match {params.dim} BN parameters")
    return x


def bn_forward_train(x: Tensor, params: BnParams, eps: float = DEFAULT_EPS) -> Tuple[Tensor, BnCache]:
    """
    Normalize every column of a mini-batch by its own mean and biased variance.

    Args:
        x (Tensor): Mini-batch of shape [m, d], m >= 2.
        params (BnParams): gamma and beta of length d.
        eps (float): Variance floor, > 0.

    Returns:
        tuple: The output y of shape [m, d] and the BnCache needed by `bn_backward`.
    """
    x = _check_input(x, params, "bn_forward_train")
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    m = x.shape[0]
    if m < 2:
        raise BatchTooSmallError(f"train-mode normalization needs m >= 2, got m={m}")

    mu_b = reduce_mean_axis0(x)
    centered = x - mu_b
    sigma2_b = reduce_mean_axis0(centered * centered)
    x_hat = centered / sqrt(sigma2_b + eps)
    y = params.gamma * x_hat + params.beta

    return y, BnCache(input=x, mu_b=mu_b, sigma2_b=sigma2_b, x_hat=x_hat, eps=eps, m=m)


def bn_backward_intermediates(cache: BnCache, dy: Tensor, params: BnParams) -> BnBackward:
    dy = as_tensor(dy)
    if dy.shape != cache.input.shape:
        raise DimensionError(f"bn_backward: dy {dy.shape} does not match input {cache.input.shape}")
    m = cache.m
    centered = cache.input - cache.mu_b
    var_eps = cache.sigma2_b + cache.eps
    inv_std = 1.0 / sqrt(var_eps)

    dx_hat = dy * params.gamma
    dsigma2 = reduce_sum_axis0(dx_hat * centered) * -0.5 * var_eps ** -1.5
    dmu = reduce_sum_axis0(dx_hat * -inv_std) + dsigma2 * reduce_sum_axis0(-2.0 * centered) / m
    dx = dx_hat * inv_std + dsigma2 * (2.0 * centered / m) + dmu / m
    dgamma = reduce_sum_axis0(dy * cache.x_hat)
    dbeta = reduce_sum_axis0(dy)

    return BnBackward(dx_hat, dsigma2, dmu, dx, dgamma, dbeta)


def bn_backward(cache: BnCache, dy: Tensor, params: BnParams) -> Tuple[Tensor, Tensor, Tensor]:
    """
    Gradients of the loss with respect to x, gamma and beta.

    The chain rule is applied term by term (through dl/dsigma2 and dl/dmu)
    rather than in a fused closed form; see `bn_backward_intermediates`.
    """
    grads = bn_backward_intermediates(cache, dy, params)
    return grads.dx, grads.dgamma, grads.dbeta


def population_moments(stats: BnStats, source: StatsSource) -> Tuple[Tensor, Tensor]:
    if source is StatsSource.EMA:
        if stats.ema_updates < 1:
            raise StateError("moving-average statistics have never been updated")
        return stats.ema_mean, stats.ema_var
    if not stats.frozen:
        raise StateError("population statistics are empty; freeze the network first")
    return stats.mean, stats.var


def bn_forward_inference(x: Tensor, params: BnParams, stats: BnStats, eps: float = DEFAULT_EPS,
                         source: StatsSource = StatsSource.POPULATION) -> Tensor:
    """ Normalize with fixed population statistics; every row is transformed independently. """
    x = _check_input(x, params, "bn_forward_inference")
    if stats.dim != params.dim:
        raise DimensionError(f"stats of length {stats.dim} do not match {params.dim} BN parameters")
    mean, var = population_moments(stats, source)
    return params.gamma * ((x - mean) / sqrt(var + eps)) + params.beta
