from dataclasses import dataclass, field
from typing import List, Sequence

from helpers.errors import ConfigError, DimensionError
from optim.schedule import LrSchedule, lr_at
from tensor import Tensor


@dataclass
class SgdState:
    """
    Heavy-ball momentum state. Velocities are created on the first step
    with the parameters' shapes.
    """
    schedule: LrSchedule
    momentum: float = 0.0
    weight_decay: float = 0.0
    velocity: List[Tensor] = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight decay must be >= 0, got {self.weight_decay}")

    @property
    def lr(self) -> float:
        return lr_at(self.step, self.schedule)


def sgd_step(params: Sequence[Tensor], grads: Sequence[Tensor], state: SgdState) -> SgdState:
    """
    One update: v <- mu*v - lr_t*(g + wd*p); p <- p + v.

    Parameters are updated in place; the same state object is returned.

    Args:
        params (list): Parameter tensors.
        grads (list): Gradients, aligned with params.
        state (SgdState): Optimizer state.

    Returns:
        SgdState: The state after the step.
    """
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.velocity:
        state.velocity = [Tensor.zeros(p.shape) for p in params]
    if len(state.velocity) != len(params):
        raise DimensionError(f"optimizer tracks {len(state.velocity)} tensors, got {len(params)}")

    lr = state.lr
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or state.velocity[i].shape != p.shape:
            raise DimensionError(f"parameter {i}: shape {p.shape} vs gradient {g.shape}")
        if state.weight_decay:
            g = g + state.weight_decay * p
        state.velocity[i] = state.momentum * state.velocity[i] - lr * g
        p.add_(state.velocity[i])
    state.step += 1
    return state
