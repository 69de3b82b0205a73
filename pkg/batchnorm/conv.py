"""
Convolutional batch normalization.

A feature map is normalized over the batch and every spatial location at
once. All operations map [m, c, p, q] onto the [m*p*q, c] row view, run the
dense transform and map the result back.
"""
from typing import Tuple

from batchnorm.folding import bn_fold
from batchnorm.transform import bn_backward, bn_forward_inference, bn_forward_train
from batchnorm.types import (
    DEFAULT_EPS,
    BnParams,
    BnStats,
    ConvBnCache,
    ConvShape,
    FoldedAffine,
    StatsSource,
)
from helpers.errors import BatchTooSmallError, DimensionError
from tensor import Tensor, as_tensor


def conv_shape(x: Tensor, params: BnParams) -> ConvShape:
    if x.ndim != 4:
        raise DimensionError(f"expected feature maps [m, c, p, q], got shape {x.shape}")
    m, c, p, q = x.shape
    if c != params.dim:
        raise DimensionError(f"{c} feature maps do not match {params.dim} BN parameters")
    return ConvShape(m=m, c=c, p=p, q=q)


def to_rows(x: Tensor) -> Tensor:
    """ [m, c, p, q] -> [m*p*q, c] """
    m, c, p, q = x.shape
    return x.transpose(0, 2, 3, 1).reshape(m * p * q, c)


def from_rows(rows: Tensor, shape: ConvShape) -> Tensor:
    """ [m*p*q, c] -> [m, c, p, q] """
    return rows.reshape(shape.m, shape.p, shape.q, shape.c).transpose(0, 3, 1, 2)


def bn_conv_forward_train(x: Tensor, params: BnParams,
                          eps: float = DEFAULT_EPS) -> Tuple[Tensor, ConvBnCache]:
    x = as_tensor(x)
    shape = conv_shape(x, params)
    if shape.effective_batch < 2:
        raise BatchTooSmallError(
            f"effective mini-batch m*p*q must be >= 2, got {shape.effective_batch}")
    y_rows, cache = bn_forward_train(to_rows(x), params, eps)
    return from_rows(y_rows, shape), ConvBnCache(bn=cache, shape=shape)


def bn_conv_backward(cache: ConvBnCache, dy: Tensor, params: BnParams) -> Tuple[Tensor, Tensor, Tensor]:
    dy = as_tensor(dy)
    expected = (cache.shape.m, cache.shape.c, cache.shape.p, cache.shape.q)
    if dy.shape != expected:
        raise DimensionError(f"bn_conv_backward: dy {dy.shape} does not match input {expected}")
    dx_rows, dgamma, dbeta = bn_backward(cache.bn, to_rows(dy), params)
    return from_rows(dx_rows, cache.shape), dgamma, dbeta


def bn_conv_forward_inference(x: Tensor, params: BnParams, stats: BnStats, eps: float = DEFAULT_EPS,
                              source: StatsSource = StatsSource.POPULATION) -> Tensor:
    x = as_tensor(x)
    shape = conv_shape(x, params)
    return from_rows(bn_forward_inference(to_rows(x), params, stats, eps, source), shape)


def bn_conv_fold(params: BnParams, stats: BnStats, eps: float = DEFAULT_EPS,
                 source: StatsSource = StatsSource.POPULATION) -> FoldedAffine:
    # per-map scale/shift, identical to the dense fold
    return bn_fold(params, stats, eps, source)


def apply_conv_fold(folded: FoldedAffine, x: Tensor) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 4 or x.shape[1] != folded.scale.shape[0]:
        raise DimensionError(f"cannot apply a {folded.scale.shape[0]}-map fold to shape {x.shape}")
    m, c, p, q = x.shape
    return from_rows(folded.apply(to_rows(x)), ConvShape(m=m, c=c, p=p, q=q))
