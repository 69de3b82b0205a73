from dataclasses import dataclass

from helpers.errors import ConfigError

SCHEDULES = ("constant", "exponential")


@dataclass(frozen=True)
class LrSchedule:
    """
    Learning rate as a function of the step.

    constant: base_lr at every step.
    exponential: base_lr * decay_rate ** (step / period).
    """
    base_lr: float
    kind: str = "constant"
    decay_rate: float = 1.0
    period: int = 1

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.base_lr}")
        if self.kind not in SCHEDULES:
            raise ConfigError(f"unknown learning rate schedule {self.kind!r}")
        if self.kind == "exponential":
            if not 0.0 < self.decay_rate <= 1.0:
                raise ConfigError(f"exponential decay rate must lie in (0, 1], got {self.decay_rate}")
            if self.period < 1:
                raise ConfigError(f"decay period must be >= 1, got {self.period}")


def lr_at(step: int, schedule: LrSchedule) -> float:
    if step < 0:
        raise ConfigError(f"step must be >= 0, got {step}")
    if schedule.kind == "constant":
        return schedule.base_lr
    return schedule.base_lr * schedule.decay_rate ** (step / schedule.period)
