import numpy as np

from config import Config, TrainConfig
from helpers.decorators import calc_time
from helpers.errors import DataFormatError, VerificationError
from logger import Logger as logger
from nn import Mode, NetworkSpec, fold_network, load_checkpoint, network_forward, save_checkpoint
from tasks.train import load_data_split

TOLERANCE = 1e-10
SAMPLES = 1000


def verification_inputs(config: TrainConfig, input_dim: int) -> np.ndarray:
    """ The first test examples, or seeded Gaussian rows when no matching test data is found. """
    try:
        test = load_data_split(config, "test")
        if test.input_dim == input_dim and len(test):
            return np.asarray(test.images)[:SAMPLES]
        logger.warning(f"test inputs have width {test.input_dim}, network expects {input_dim}")
    except DataFormatError as e:
        logger.warning(f"no test data ({e})")
    logger.warning("verifying the fold on Gaussian inputs instead")
    return np.random.default_rng(config.seed).normal(size=(SAMPLES, input_dim))


def max_deviation(net: NetworkSpec, folded: NetworkSpec, x: np.ndarray) -> float:
    expected, _ = network_forward(net, x, Mode.INFERENCE)
    actual, _ = network_forward(folded, x, Mode.INFERENCE)
    return float(np.max(np.abs(expected.logits.data - actual.logits.data)))


@calc_time
def run_job(config: Config) -> int:
    net, meta = load_checkpoint(config.checkpoint_in)
    folded = fold_network(net)
    removed = len(net.batchnorm_layers())
    logger.info(f"Folded {removed} batchnorm layers: {len(net.layers)} -> {len(folded.layers)} layers")

    deviation = max_deviation(net, folded, verification_inputs(config.train, net.input_dim))
    logger.log(f"Max output deviation: {deviation:.3e} (tolerance {TOLERANCE:.0e})")
    if not deviation < TOLERANCE:
        raise VerificationError(f"folded network deviates by {deviation:.3e} from {config.checkpoint_in}")

    path = save_checkpoint(folded, config.checkpoint_out, meta.get("step"))
    logger.success(f"Folded checkpoint written to {path}")
    return 0
