import numpy as np
import numpy.testing as npt
import pytest

from helpers.errors import ConfigError, DimensionError
from optim import LrSchedule, SgdState, lr_at, sgd_step
from tensor import Tensor


def run_steps(grads, lr=0.1, momentum=0.0, weight_decay=0.0, start=0.0):
    p = Tensor([start])
    state = SgdState(LrSchedule(lr), momentum, weight_decay)
    trajectory = []
    for g in grads:
        sgd_step([p], [Tensor([g])], state)
        trajectory.append(p.item())
    return trajectory, state


def test_without_momentum_is_plain_sgd():
    trajectory, _ = run_steps([2.0, -1.0], lr=0.1, start=1.0)
    npt.assert_allclose(trajectory, [0.8, 0.9])


def test_momentum_hand_example():
    trajectory, state = run_steps([1.0, 1.0], lr=0.1, momentum=0.9)
    npt.assert_allclose(trajectory, [-0.1, -0.29])
    assert state.step == 2
    npt.assert_allclose(state.velocity[0].data, [-0.19])


def test_zero_gradient_only_decays_the_velocity():
    trajectory, _ = run_steps([1.0, 0.0, 0.0, 0.0], lr=0.1, momentum=0.5)
    npt.assert_allclose(np.diff([0.0] + trajectory), [-0.1, -0.05, -0.025, -0.0125])


def test_weight_decay_pulls_towards_zero():
    trajectory, _ = run_steps([0.0], lr=0.1, weight_decay=0.1, start=1.0)
    npt.assert_allclose(trajectory, [0.99])


def test_step_keeps_shapes_and_checks_them():
    params = [Tensor.ones((2, 3)), Tensor.zeros(3)]
    state = SgdState(LrSchedule(0.1), momentum=0.9)
    sgd_step(params, [Tensor.ones((2, 3)), Tensor.ones(3)], state)
    assert [p.shape for p in params] == [(2, 3), (3,)]
    with pytest.raises(DimensionError):
        sgd_step(params, [Tensor.ones((3, 2)), Tensor.ones(3)], state)
    with pytest.raises(DimensionError):
        sgd_step(params, [Tensor.ones((2, 3))], state)


def test_schedules():
    constant = LrSchedule(0.3)
    assert lr_at(0, constant) == lr_at(12345, constant) == 0.3

    exponential = LrSchedule(0.8, "exponential", decay_rate=0.5, period=1000)
    assert lr_at(0, exponential) == 0.8
    assert lr_at(2000, exponential) == pytest.approx(0.2)
    rates = [lr_at(step, exponential) for step in range(0, 5000, 250)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_state_follows_the_schedule():
    state = SgdState(LrSchedule(1.0, "exponential", decay_rate=0.5, period=1))
    p = Tensor([0.0])
    for _ in range(3):
        sgd_step([p], [Tensor([1.0])], state)
    npt.assert_allclose(p.data, [-(1.0 + 0.5 + 0.25)])


@pytest.mark.parametrize("kwargs", [
    {"base_lr": 0.0},
    {"base_lr": 0.1, "kind": "cosine"},
    {"base_lr": 0.1, "kind": "exponential", "decay_rate": 1.5},
    {"base_lr": 0.1, "kind": "exponential", "period": 0},
])
def test_invalid_schedules(kwargs):
    with pytest.raises(ConfigError):
        LrSchedule(**kwargs)


def test_invalid_optimizer_settings():
    with pytest.raises(ConfigError):
        SgdState(LrSchedule(0.1), momentum=1.0)
    with pytest.raises(ConfigError):
        SgdState(LrSchedule(0.1), weight_decay=-0.1)
    with pytest.raises(ConfigError):
        lr_at(-1, LrSchedule(0.1))
