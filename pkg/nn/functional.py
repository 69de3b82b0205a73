from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from helpers.errors import DataFormatError, DimensionError
from tensor import Tensor, as_tensor, elementwise, matmul, reduce_sum_axis0


@dataclass(frozen=True)
class AffineCache:
    u: Tensor
    W: Tensor
    has_bias: bool


def affine_forward(u: Tensor, W: Tensor, b: Optional[Tensor] = None) -> Tuple[Tensor, AffineCache]:
    """
    z = uW (+ b broadcast over rows).

    Args:
        u (Tensor): Inputs [m, d_in].
        W (Tensor): Weights [d_in, d_out].
        b (Tensor, optional): Bias [d_out].

    Returns:
        tuple: z of shape [m, d_out] and the cache for `affine_backward`.
    """
    u, W = as_tensor(u), as_tensor(W)
    z = matmul(u, W)
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[1],):
            raise DimensionError(f"bias {b.shape} does not match weights {W.shape}")
        z = z + b
    return z, AffineCache(u=u, W=W, has_bias=b is not None)


def affine_backward(cache: AffineCache, dz: Tensor) -> Tuple[Tensor, Tensor, Optional[Tensor]]:
    dz = as_tensor(dz)
    if dz.shape != (cache.u.shape[0], cache.W.shape[1]):
        raise DimensionError(f"affine_backward: dz {dz.shape} does not match output "
                             f"({cache.u.shape[0]}, {cache.W.shape[1]})")
    du = matmul(dz, cache.W.T)
    dW = matmul(cache.u.T, dz)
    db = reduce_sum_axis0(dz) if cache.has_bias else None
    return du, dW, db


def _sigmoid(v: np.ndarray) -> np.ndarray:
    # tanh form never overflows and saturates to exactly 0/1
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def sigmoid_forward(x: Tensor) -> Tuple[Tensor, Tensor]:
    y = elementwise(x, _sigmoid)
    return y, y


def sigmoid_backward(cache: Tensor, dz: Tensor) -> Tensor:
    y = cache
    return as_tensor(dz) * y * (1.0 - y)


def relu_forward(x: Tensor) -> Tuple[Tensor, Tensor]:
    x = as_tensor(x)
    return elementwise(x, lambda v: np.maximum(v, 0.0)), x


def relu_backward(cache: Tensor, dz: Tensor) -> Tensor:
    # subgradient at exactly 0 is 0
    mask = elementwise(cache, lambda v: (v > 0.0).astype(np.float64))
    return as_tensor(dz) * mask


def softmax_cross_entropy(logits: Tensor, labels) -> Tuple[float, Tensor]:
    """
    Mean cross-entropy of softmax(logits) against integer class labels.

    Returns:
        tuple: The scalar loss and dl/dlogits = (softmax - onehot) / m.
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise DimensionError(f"logits must be [m, K], got {logits.shape}")
    m, k = logits.shape
    if labels.shape != (m,):
        raise DimensionError(f"labels {labels.shape} do not match {m} logits rows")
    if not np.issubdtype(labels.dtype, np.integer) or labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise DataFormatError(f"labels must be integer classes in [0, {k})")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(m)
    loss = float(-log_probs[rows, labels].mean())

    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    return loss, Tensor._wrap(dlogits / m, "softmax_cross_entropy")
