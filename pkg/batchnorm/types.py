from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from helpers.errors import DimensionError
from tensor import Tensor, as_tensor


DEFAULT_EPS = 1e-5


class StatsSource(Enum):
    """ Which population estimate inference-mode normalization reads. """
    POPULATION = "population"
    EMA = "ema"


@dataclass(frozen=True)
class BnParams:
    """ Learned scale (gamma) and shift (beta), one entry per normalized dimension. """
    gamma: Tensor
    beta: Tensor

    def __post_init__(self):
        object.__setattr__(self, "gamma", as_tensor(self.gamma))
        object.__setattr__(self, "beta", as_tensor(self.beta))
        if self.gamma.ndim != 1 or self.gamma.shape != self.beta.shape:
            raise DimensionError(
                f"gamma {self.gamma.shape} and beta {self.beta.shape} must be vectors of equal length")

    @classmethod
    def identity(cls, d: int) -> "BnParams":
        return cls(Tensor.ones(d), Tensor.zeros(d))

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class BnStats:
    """
    Population statistics of one BN transform.

    `mean`/`var` hold the exact multi-batch average (variance already
    corrected by m/(m-1)); `ema_mean`/`ema_var` hold the moving-average
    estimate. Both are tracked independently and counted separately.
    """
    mean: Tensor
    var: Tensor
    ema_mean: Tensor
    ema_var: Tensor
    batches_seen: int = 0
    ema_updates: int = 0
    batch_size: Optional[int] = None

    @classmethod
    def empty(cls, d: int) -> "BnStats":
        return cls(
            mean=Tensor.zeros(d),
            var=Tensor.zeros(d),
            ema_mean=Tensor.zeros(d),
            ema_var=Tensor.zeros(d),
        )

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def frozen(self) -> bool:
        return self.batches_seen >= 1

    @property
    def uncorrected_var(self) -> Tensor:
        """ Plain average of the mini-batch variances, without the m/(m-1) factor. """
        if not self.batch_size:
            return self.var
        m = self.batch_size
        return self.var * ((m - 1) / m)


@dataclass(frozen=True)
class BnCache:
    input: Tensor
    mu_b: Tensor
    sigma2_b: Tensor
    x_hat: Tensor
    eps: float
    m: int

    @property
    def batch_stats(self) -> Tuple[Tensor, Tensor, int]:
        return self.mu_b, self.sigma2_b, self.m


@dataclass(frozen=True)
class FoldedAffine:
    scale: Tensor
    shift: Tensor

    def apply(self, x: Tensor) -> Tensor:
        return x * self.scale + self.shift


@dataclass(frozen=True)
class ConvShape:
    m: int
    c: int
    p: int
    q: int

    @property
    def effective_batch(self) -> int:
        return self.m * self.p * self.q


@dataclass(frozen=True)
class ConvBnCache:
    bn: BnCache
    shape: ConvShape
