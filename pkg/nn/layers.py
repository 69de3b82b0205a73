from enum import Enum
from typing import Any, Dict, Optional, Tuple

from batchnorm import (
    DEFAULT_EPS,
    BnParams,
    BnStats,
    StatsSource,
    bn_backward,
    bn_forward_inference,
    bn_forward_train,
)
from helpers.errors import DimensionError
from nn.functional import (
    affine_backward,
    affine_forward,
    relu_backward,
    relu_forward,
    sigmoid_backward,
    sigmoid_forward,
)
from tensor import Tensor, as_tensor


class Mode(Enum):
    TRAIN = "train"
    INFERENCE = "inference"


class Layer:
    """ One stage of a NetworkSpec. Layers hold parameters; caches live in the forward trace. """
    kind = "layer"

    def forward(self, x: Tensor, mode: Mode, source: StatsSource) -> Tuple[Tensor, Any]:
        raise NotImplementedError

    def backward(self, cache: Any, dy: Tensor) -> Tuple[Tensor, Dict[str, Tensor]]:
        raise NotImplementedError

    def parameters(self) -> Dict[str, Tensor]:
        return {}

    def clone(self) -> "Layer":
        return type(self)()

    def output_dim(self, input_dim: int) -> int:
        return input_dim


class Affine(Layer):
    kind = "affine"

    def __init__(self, W: Tensor, b: Optional[Tensor] = None):
        self.W = as_tensor(W)
        self.b = as_tensor(b) if b is not None else None
        if self.W.ndim != 2:
            raise DimensionError(f"weights must be a matrix, got {self.W.shape}")
        if self.b is not None and self.b.shape != (self.W.shape[1],):
            raise DimensionError(f"bias {self.b.shape} does not match weights {self.W.shape}")

    def forward(self, x, mode, source):
        return affine_forward(x, self.W, self.b)

    def backward(self, cache, dy):
        du, dW, db = affine_backward(cache, dy)
        grads = {"W": dW}
        if db is not None:
            grads["b"] = db
        return du, grads

    def parameters(self):
        params = {"W": self.W}
        if self.b is not None:
            params["b"] = self.b
        return params

    def clone(self):
        return Affine(self.W.copy(), self.b.copy() if self.b is not None else None)

    def output_dim(self, input_dim):
        if input_dim != self.W.shape[0]:
            raise DimensionError(f"affine expects width {self.W.shape[0]}, got {input_dim}")
        return self.W.shape[1]


class BatchNorm(Layer):
    kind = "batchnorm"

    def __init__(self, params: BnParams, stats: Optional[BnStats] = None, eps: float = DEFAULT_EPS):
        self.params = params
        self.stats = stats if stats is not None else BnStats.empty(params.dim)
        self.eps = eps
        if self.stats.dim != params.dim:
            raise DimensionError(f"stats of length {self.stats.dim} do not match {params.dim} BN parameters")

    @classmethod
    def identity(cls, d: int, eps: float = DEFAULT_EPS) -> "BatchNorm":
        return cls(BnParams.identity(d), BnStats.empty(d), eps)

    def forward(self, x, mode, source):
        if mode is Mode.TRAIN:
            return bn_forward_train(x, self.params, self.eps)
        return bn_forward_inference(x, self.params, self.stats, self.eps, source), None

    def backward(self, cache, dy):
        dx, dgamma, dbeta = bn_backward(cache, dy, self.params)
        return dx, {"gamma": dgamma, "beta": dbeta}

    def parameters(self):
        return {"gamma": self.params.gamma, "beta": self.params.beta}

    def clone(self):
        params = BnParams(self.params.gamma.copy(), self.params.beta.copy())
        return BatchNorm(params, self.stats, self.eps)

    def output_dim(self, input_dim):
        if input_dim != self.params.dim:
            raise DimensionError(f"batchnorm expects width {self.params.dim}, got {input_dim}")
        return input_dim


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, mode, source):
        return sigmoid_forward(x)

    def backward(self, cache, dy):
        return sigmoid_backward(cache, dy), {}


class Relu(Layer):
    kind = "relu"

    def forward(self, x, mode, source):
        return relu_forward(x)

    def backward(self, cache, dy):
        return relu_backward(cache, dy), {}


NONLINEARITIES = {
    "sigmoid": Sigmoid,
    "relu": Relu,
}


def is_nonlinearity(layer: Layer) -> bool:
    return isinstance(layer, (Sigmoid, Relu))
