from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from batchnorm import BnParams, bn_backward, bn_conv_backward, bn_conv_forward_train, bn_forward_train
from config import Config
from helpers.decorators import calc_time
from helpers.errors import VerificationError
from helpers.gradcheck import numerical_gradient, relative_error, sample_indices
from logger import Logger as logger
from nn import (
    Mode,
    affine_backward,
    affine_forward,
    batch_normalize_network,
    build_mlp,
    network_backward,
    network_forward,
    relu_backward,
    relu_forward,
    sigmoid_backward,
    sigmoid_forward,
    softmax_cross_entropy,
)
from tensor import Tensor

TOLERANCE = 1e-5
EPS = 1e-5
# coordinates sampled per parameter tensor of the MNIST-sized network
MNIST_SAMPLES = 25


@dataclass
class CheckResult:
    op: str
    trials: int
    max_rel_error: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


@dataclass
class Sweep:
    """ Sizes and randomness shared by all checks of one run. """
    rng: np.random.Generator
    trials: int = 20
    max_batch: int = 16
    max_dim: int = 8
    corrupt: Optional[str] = None

    def batch_size(self, trial: int) -> int:
        # the smallest legal batch always takes part
        return 2 if trial == 0 else int(self.rng.integers(2, self.max_batch + 1))

    def dim(self) -> int:
        return int(self.rng.integers(1, self.max_dim + 1))

    def tamper(self, op: str, output: str, grad) -> np.ndarray:
        """ Gradient as computed, or skewed when `corrupt` names the op or "op:output". """
        grad = np.array(grad, dtype=np.float64)
        if self.corrupt in (op, f"{op}:{output}"):
            grad = grad * 1.01 + 1e-3
        return grad


def _projected(forward: Callable[[np.ndarray], Tensor], dy: np.ndarray) -> Callable[[np.ndarray], float]:
    """ l(x) = sum(dy * forward(x)), whose gradient is the backward pass of dy. """
    return lambda x: float(np.sum(dy * forward(x).data))


def check_bn_backward(sweep: Sweep) -> CheckResult:
    worst = 0.0
    for trial in range(sweep.trials):
        m, d = sweep.batch_size(trial), sweep.dim()
        # at m=2 the normalized values are ±1 unless sigma_B^2 is comparable to eps
        scale = 0.005 if m == 2 else sweep.rng.uniform(0.5, 3.0)
        x = sweep.rng.normal(size=(m, d)) * scale + sweep.rng.normal()
        gamma, beta = sweep.rng.normal(size=d), sweep.rng.normal(size=d)
        dy = sweep.rng.normal(size=(m, d))
        params = BnParams(gamma, beta)
        _, cache = bn_forward_train(x, params, EPS)
        dx, dgamma, dbeta = bn_backward(cache, dy, params)

        num_dx = numerical_gradient(_projected(lambda v: bn_forward_train(v, params, EPS)[0], dy), x)
        num_dgamma = numerical_gradient(
            _projected(lambda g: bn_forward_train(x, BnParams(g, beta), EPS)[0], dy), gamma)
        num_dbeta = numerical_gradient(
            _projected(lambda b: bn_forward_train(x, BnParams(gamma, b), EPS)[0], dy), beta)
        worst = max(worst,
                    relative_error(sweep.tamper("bn_backward", "dx", dx), num_dx),
                    relative_error(sweep.tamper("bn_backward", "dgamma", dgamma), num_dgamma),
                    relative_error(sweep.tamper("bn_backward", "dbeta", dbeta), num_dbeta))
    return CheckResult("bn_backward", sweep.trials, worst)


def check_bn_conv_backward(sweep: Sweep) -> CheckResult:
    worst = 0.0
    for trial in range(sweep.trials):
        m = 1 + int(sweep.rng.integers(0, 3))
        c = 1 + int(sweep.rng.integers(0, 3))
        p = 2 + int(sweep.rng.integers(0, 2))
        q = 2 + int(sweep.rng.integers(0, 2))
        x = sweep.rng.normal(size=(m, c, p, q)) * 2.0 + 0.5
        gamma, beta = sweep.rng.normal(size=c), sweep.rng.normal(size=c)
        dy = sweep.rng.normal(size=(m, c, p, q))
        params = BnParams(gamma, beta)
        _, cache = bn_conv_forward_train(x, params, EPS)
        dx, dgamma, dbeta = bn_conv_backward(cache, dy, params)

        num_dx = numerical_gradient(_projected(lambda v: bn_conv_forward_train(v, params, EPS)[0], dy), x)
        num_dgamma = numerical_gradient(
            _projected(lambda g: bn_conv_forward_train(x, BnParams(g, beta), EPS)[0], dy), gamma)
        num_dbeta = numerical_gradient(
            _projected(lambda b: bn_conv_forward_train(x, BnParams(gamma, b), EPS)[0], dy), beta)
        worst = max(worst,
                    relative_error(sweep.tamper("bn_conv_backward", "dx", dx), num_dx),
                    relative_error(sweep.tamper("bn_conv_backward", "dgamma", dgamma), num_dgamma),
                    relative_error(sweep.tamper("bn_conv_backward", "dbeta", dbeta), num_dbeta))
    return CheckResult("bn_conv_backward", sweep.trials, worst)


def check_affine(sweep: Sweep) -> CheckResult:
    worst = 0.0
    for trial in range(sweep.trials):
        m, d_in, d_out = sweep.batch_size(trial), sweep.dim(), sweep.dim()
        u = sweep.rng.normal(size=(m, d_in))
        W = sweep.rng.normal(size=(d_in, d_out))
        b = sweep.rng.normal(size=d_out)
        dz = sweep.rng.normal(size=(m, d_out))
        _, cache = affine_forward(u, W, b)
        du, dW, db = affine_backward(cache, dz)

        num_du = numerical_gradient(_projected(lambda v: affine_forward(v, W, b)[0], dz), u)
        num_dW = numerical_gradient(_projected(lambda v: affine_forward(u, v, b)[0], dz), W)
        num_db = numerical_gradient(_projected(lambda v: affine_forward(u, W, v)[0], dz), b)
        worst = max(worst,
                    relative_error(sweep.tamper("affine", "du", du), num_du),
                    relative_error(sweep.tamper("affine", "dW", dW), num_dW),
                    relative_error(sweep.tamper("affine", "db", db), num_db))
    return CheckResult("affine", sweep.trials, worst)


def _check_activation(sweep: Sweep, op: str, forward, backward) -> CheckResult:
    worst = 0.0
    for trial in range(sweep.trials):
        m, d = sweep.batch_size(trial), sweep.dim()
        x = sweep.rng.normal(size=(m, d)) * 3.0
        # keep clear of the ReLU kink
        x = np.sign(x) * (np.abs(x) + 1e-2)
        dz = sweep.rng.normal(size=(m, d))
        _, cache = forward(x)
        dx = backward(cache, dz)
        num_dx = numerical_gradient(_projected(lambda v: forward(v)[0], dz), x)
        worst = max(worst, relative_error(sweep.tamper(op, "dx", dx), num_dx))
    return CheckResult(op, sweep.trials, worst)


def check_sigmoid(sweep: Sweep) -> CheckResult:
    return _check_activation(sweep, "sigmoid", sigmoid_forward, sigmoid_backward)


def check_relu(sweep: Sweep) -> CheckResult:
    return _check_activation(sweep, "relu", relu_forward, relu_backward)


def check_softmax_cross_entropy(sweep: Sweep) -> CheckResult:
    worst = 0.0
    for trial in range(sweep.trials):
        m, k = sweep.batch_size(trial), 2 + int(sweep.rng.integers(0, 9))
        logits = sweep.rng.normal(size=(m, k)) * 2.0
        labels = sweep.rng.integers(0, k, size=m)
        _, dlogits = softmax_cross_entropy(logits, labels)
        num = numerical_gradient(lambda v: softmax_cross_entropy(v, labels)[0], logits)
        worst = max(worst, relative_error(sweep.tamper("softmax_cross_entropy", "dlogits", dlogits), num))
    return CheckResult("softmax_cross_entropy", sweep.trials, worst)


def _network_error(net, x: np.ndarray, labels: np.ndarray, sweep: Sweep, op: str,
                   samples: Optional[int] = None) -> float:
    """
    Relative error over the concatenated gradient of every parameter.

    Measured jointly because first-layer gradients behind a saturated m=2
    normalization sit near the finite-difference noise floor.
    """
    trace, _ = network_forward(net, x, Mode.TRAIN, labels)
    grads = network_backward(net, trace).flat()
    analytic_parts, numeric_parts = [], []
    for (i, param, tensor), grad in zip(net.parameters(), grads):
        name = f"{i}.{param}"
        original = tensor.numpy()

        def loss(values, tensor=tensor):
            tensor.assign_(values)
            return network_forward(net, x, Mode.TRAIN, labels)[1]

        indices = sample_indices(original.shape, samples, sweep.rng) if samples else None
        numeric = numerical_gradient(loss, original, indices=indices)
        tensor.assign_(original)
        analytic = sweep.tamper(op, name, grad)
        if indices is not None:
            picked = tuple(np.array(indices).T)
            analytic, numeric = analytic[picked], numeric[picked]
        analytic_parts.append(np.ravel(analytic))
        numeric_parts.append(np.ravel(numeric))
    return relative_error(np.concatenate(analytic_parts), np.concatenate(numeric_parts))


def check_network(sweep: Sweep) -> CheckResult:
    worst = 0.0
    for trial in range(sweep.trials):
        m = (2, 4, 8)[trial % 3]
        d_in, k = sweep.dim() + 1, 2 + int(sweep.rng.integers(0, 4))
        hidden = [sweep.dim() + 1 for _ in range(1 + int(sweep.rng.integers(0, 3)))]
        nonlinearity = ("sigmoid", "relu")[trial % 2]
        net = batch_normalize_network(build_mlp(d_in, hidden, k, nonlinearity, 0.5, sweep.rng))
        x = sweep.rng.normal(size=(m, d_in))
        labels = sweep.rng.integers(0, k, size=m)
        worst = max(worst, _network_error(net, x, labels, sweep, "network"))
    return CheckResult("network", sweep.trials, worst)


def check_mnist_network(sweep: Sweep) -> CheckResult:
    """ The experiment's 784-100-100-100-10 BN network on m=4 synthetic inputs, sampled coordinates. """
    trials = 2
    worst = 0.0
    for _ in range(trials):
        net = batch_normalize_network(build_mlp(784, (100, 100, 100), 10, "sigmoid", 0.1, sweep.rng))
        x = (sweep.rng.uniform(size=(4, 784)) > 0.5).astype(np.float64)
        labels = sweep.rng.integers(0, 10, size=4)
        worst = max(worst, _network_error(net, x, labels, sweep, "mnist_network", MNIST_SAMPLES))
    return CheckResult("mnist_network", trials, worst)


CHECKS: Dict[str, Callable[[Sweep], CheckResult]] = {
    "bn_backward": check_bn_backward,
    "bn_conv_backward": check_bn_conv_backward,
    "affine": check_affine,
    "sigmoid": check_sigmoid,
    "relu": check_relu,
    "softmax_cross_entropy": check_softmax_cross_entropy,
    "network": check_network,
    "mnist_network": check_mnist_network,
}


def run_checks(seed: int = 0, trials: int = 20, max_batch: int = 16, max_dim: int = 8,
               corrupt: Optional[str] = None) -> List[CheckResult]:
    sweep = Sweep(np.random.default_rng(seed), trials, max_batch, max_dim, corrupt)
    results = []
    for name, check in CHECKS.items():
        logger.debug(f"Running gradient check {name}")
        results.append(check(sweep))
    return results


def report(results: List[CheckResult]) -> pd.DataFrame:
    return pd.DataFrame([
        {"op": r.op, "trials": r.trials, "max_rel_error": r.max_rel_error,
         "status": "pass" if r.passed else "FAIL"}
        for r in results
    ])


@calc_time
def run_job(config: Config) -> int:
    logger.info(f"Gradient checks with seed {config.train.seed}, {config.trials} trials each")
    results = run_checks(config.train.seed, config.trials, config.max_batch, config.max_dim, config.corrupt)
    table = report(results)
    logger.log(table.to_string(index=False, float_format=lambda v: f"{v:.3e}"))

    failed = [r.op for r in results if not r.passed]
    if failed:
        raise VerificationError(f"gradient check failed for {', '.join(failed)}")
    logger.success(f"All gradient checks passed (max relative error {table.max_rel_error.max():.3e})")
    return 0
