"""
Training run of the MNIST experiment: momentum SGD over seeded mini-batches,
periodic test accuracy and probe percentiles, metrics CSV and checkpoints.
"""
from dataclasses import dataclass
from itertools import islice
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from batchnorm import StatsSource
from config import Config, TrainConfig
from data import NUM_CLASSES, BatchIterator, Dataset, load_split
from helpers.decorators import calc_time
from helpers.errors import ConfigError
from logger import Logger as logger
from nn import (
    Mode,
    NetworkSpec,
    batch_normalize_network,
    build_mlp,
    freeze_network,
    network_backward,
    network_forward,
    save_checkpoint,
    update_running_stats,
)
from optim import SgdState, sgd_step
from tensor import Tensor

METRICS_COLUMNS = ["step", "test_accuracy", "train_loss", "p15", "p50", "p85"]
PERCENTILES = (15, 50, 85)
FLOAT_FORMAT = "%.9g"
EVAL_CHUNK = 1000


@dataclass(frozen=True)
class SeedStreams:
    """ Independent seed streams derived from the run seed. """
    init: np.random.SeedSequence
    batches: np.random.SeedSequence
    probe: np.random.SeedSequence
    freeze: np.random.SeedSequence

    @classmethod
    def from_seed(cls, seed: int) -> "SeedStreams":
        return cls(*np.random.SeedSequence(seed).spawn(4))


@dataclass
class TrainResult:
    config: TrainConfig
    network: NetworkSpec
    records: List[dict]
    inference_network: Optional[NetworkSpec] = None

    def metrics(self) -> pd.DataFrame:
        return pd.DataFrame(self.records, columns=METRICS_COLUMNS)


def load_data_split(config: TrainConfig, split: str) -> Dataset:
    threshold = config.threshold if config.binarize else None
    return load_split(config.data_dir, split, threshold, config.image_shape)


def load_data(config: TrainConfig) -> Tuple[Dataset, Dataset]:
    return load_data_split(config, "train"), load_data_split(config, "test")


def build_network(config: TrainConfig, input_dim: int, seed) -> NetworkSpec:
    """ Baseline network from the init stream, batch-normalized when `config.bn` is on. """
    net = build_mlp(input_dim, config.hidden, NUM_CLASSES, config.nonlinearity, config.init_std,
                    np.random.default_rng(seed))
    if config.bn:
        net = batch_normalize_network(net, eps=config.eps)
    return net


def probe_set(test: Dataset, size: int, seed) -> Dataset:
    """ Fixed held-out subset the probe percentiles are measured on, in file order. """
    count = min(size, len(test))
    if count < 2:
        raise ConfigError(f"probe set needs at least 2 examples, test split has {len(test)}")
    rng = np.random.default_rng(seed)
    return test.subset(np.sort(rng.choice(len(test), size=count, replace=False)))


def _probe_batches(net: NetworkSpec, x: np.ndarray, chunk: int):
    if net.mode is Mode.INFERENCE or not net.batchnorm_layers():
        yield x
        return
    # train-mode normalization needs m >= 2, a single leftover row is skipped
    for start in range(0, len(x), chunk):
        batch = x[start:start + chunk]
        if len(batch) >= 2:
            yield batch


def probe_inputs(net: NetworkSpec, x: Tensor, layer: int, unit: int, chunk: int) -> np.ndarray:
    """
    Values of one hidden unit's nonlinearity input over x.

    Train-mode BN networks see x in consecutive batches of `chunk`, so the
    values are the ones the training network actually feeds its nonlinearity.

    Args:
        net (NetworkSpec): The network, in its own mode.
        x (Tensor): Probe inputs.
        layer (int): Hidden layer index, 0-based.
        unit (int): Unit within that layer.
        chunk (int): Batch size of train-mode forward passes.

    Returns:
        np.ndarray: One value per probed example.
    """
    positions = net.activation_indices()
    if not 0 <= layer < len(positions):
        raise ConfigError(f"probe layer {layer} outside 0..{len(positions) - 1}")
    values = []
    for batch in _probe_batches(net, np.asarray(x), chunk):
        trace, _ = network_forward(net, batch)
        column = trace.layer_input(positions[layer]).data
        if not 0 <= unit < column.shape[1]:
            raise ConfigError(f"probe unit {unit} outside 0..{column.shape[1] - 1} of layer {layer}")
        values.append(column[:, unit])
    return np.concatenate(values)


def probe_percentiles(values: np.ndarray) -> Tuple[float, float, float]:
    p15, p50, p85 = np.percentile(values, PERCENTILES)
    return float(p15), float(p50), float(p85)


def evaluate(net: NetworkSpec, dataset: Dataset, mode: Mode = Mode.INFERENCE,
             chunk: int = EVAL_CHUNK) -> Tuple[float, float]:
    """ Accuracy and mean cross-entropy of a network over a dataset. """
    if len(dataset) == 0:
        raise ConfigError(f"cannot evaluate on an empty {dataset.split} split")
    correct, total_loss = 0, 0.0
    for batch in dataset.chunks(chunk):
        trace, loss = network_forward(net, batch.images, mode, batch.labels)
        correct += int(np.sum(np.argmax(trace.logits.data, axis=1) == batch.labels))
        total_loss += loss * len(batch.labels)
    return correct / len(dataset), total_loss / len(dataset)


def freeze(net: NetworkSpec, train_set: Dataset, batch_size: int, batches: int, seed,
           progress: bool = False) -> NetworkSpec:
    """ Inference network with population statistics averaged over `batches` training batches. """
    iterator = BatchIterator(train_set, batch_size, seed)
    stream = (batch.images for batch in islice(iterator, batches))
    stream = tqdm(stream, total=batches, desc="Freezing", ncols=100, disable=logger.quiet or not progress)
    net_inf = freeze_network(net, stream)
    net_inf.stats_source = StatsSource.POPULATION
    return net_inf


def evaluation_network(net: NetworkSpec, config: TrainConfig, train_set: Dataset,
                       streams: SeedStreams) -> NetworkSpec:
    if not net.batchnorm_layers():
        return net
    if config.eval_stats == "ema":
        snapshot = net.clone()
        snapshot.mode = Mode.INFERENCE
        snapshot.stats_source = StatsSource.EMA
        return snapshot
    return freeze(net, train_set, config.batch_size, config.freeze_batches, streams.freeze)


def eval_steps(steps: int, every: int) -> List[int]:
    """ Every multiple of `every` up to `steps`, plus the final step. """
    points = list(range(every, steps + 1, every))
    if not points or points[-1] != steps:
        points.append(steps)
    return points


def train(config: TrainConfig, train_set: Dataset, test_set: Dataset, progress: bool = True) -> TrainResult:
    """
    Train one network as configured.

    Args:
        config (TrainConfig): Hyperparameters; validated before anything runs.
        train_set (Dataset): Source of the mini-batches.
        test_set (Dataset): Accuracy and probe data.
        progress (bool): Show progress bars.

    Returns:
        TrainResult: The trained network, one metrics record per eval point
            and, for BN networks, the frozen inference network.
    """
    config.validate()
    streams = SeedStreams.from_seed(config.seed)
    net = build_network(config, train_set.input_dim, streams.init)
    probe = probe_set(test_set, config.probe_size, streams.probe)
    iterator = BatchIterator(train_set, config.batch_size, streams.batches)
    state = SgdState(config.schedule(), config.momentum, config.weight_decay)
    params = [tensor for _, _, tensor in net.parameters()]
    has_bn = bool(net.batchnorm_layers())
    points = set(eval_steps(config.steps, config.eval_every))
    logger.debug(f"Network with {len(net.layers)} layers and {net.parameter_count()} parameters")

    records, losses = [], []
    for step in tqdm(range(1, config.steps + 1), desc="Training", ncols=100,
                     disable=logger.quiet or not progress):
        batch = next(iterator)
        trace, loss = network_forward(net, batch.images, Mode.TRAIN, batch.labels)
        grads = network_backward(net, trace).flat()
        if has_bn:
            update_running_stats(net, trace, config.ema_decay)
        sgd_step(params, grads, state)
        losses.append(loss)

        if step in points:
            accuracy, _ = evaluate(evaluation_network(net, config, train_set, streams), test_set)
            values = probe_inputs(net, probe.images, config.probe_layer, config.probe_unit, config.batch_size)
            p15, p50, p85 = probe_percentiles(values)
            records.append({"step": step, "test_accuracy": accuracy, "train_loss": float(np.mean(losses)),
                            "p15": p15, "p50": p50, "p85": p85})
            logger.debug(f"step {step}: test accuracy {accuracy:.4f}, train loss {np.mean(losses):.4f}")
            losses = []
            if config.snapshots:
                save_checkpoint(net, config.snapshot_dir / f"step_{step:07d}.npz", step)

    inference_network = None
    if has_bn:
        inference_network = freeze(net, train_set, config.batch_size, config.freeze_batches,
                                   streams.freeze, progress)
    return TrainResult(config, net, records, inference_network)


def write_metrics(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_outputs(result: TrainResult):
    config = result.config
    write_metrics(result.metrics(), config.metrics_path)
    config.sidecar_path.write_text(config.as_text())
    save_checkpoint(result.network, config.checkpoint_path, config.steps)
    if result.inference_network is not None:
        save_checkpoint(result.inference_network, config.inference_path, config.steps)
    logger.log(f"Metrics written to {config.metrics_path}, checkpoint to {config.checkpoint_path}")


@calc_time
def run_job(config: Config) -> int:
    cfg = config.train
    arm = "batch-normalized" if cfg.bn else "baseline"
    logger.info(f"Training {arm} network for {cfg.steps} steps (seed {cfg.seed})")
    train_set, test_set = load_data(cfg)
    result = train(cfg, train_set, test_set)
    write_outputs(result)

    final = result.records[-1]
    logger.success(f"Step {final['step']}: test accuracy {final['test_accuracy']:.4f}")
    if result.inference_network is not None:
        accuracy, loss = evaluate(result.inference_network, test_set)
        logger.success(f"Frozen inference network: test accuracy {accuracy:.4f}, loss {loss:.4f}")
    return 0
