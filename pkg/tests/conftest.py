from dataclasses import replace

import numpy as np
import pytest

from config import TrainConfig
from data import write_idx
from logger import Logger


@pytest.fixture(autouse=True)
def quiet_logger():
    verbose, quiet = Logger.verbose, Logger.quiet
    Logger.verbose, Logger.quiet = False, True
    yield
    Logger.verbose, Logger.quiet = verbose, quiet


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def synthetic_images(labels: np.ndarray, rng: np.random.Generator, size: int = 8) -> np.ndarray:
    """ One bright row (classes 0-7) or column (classes 8-9) per class over dim noise. """
    images = rng.integers(0, 60, size=(len(labels), size, size), dtype=np.uint8)
    for i, label in enumerate(labels):
        if label < size:
            images[i, label, :] = 255
        else:
            images[i, :, label - size] = 255
    return images


@pytest.fixture
def mnist_dir(tmp_path):
    """ Directory with small MNIST-named IDX files: 200 train and 60 test 8x8 images. """
    rng = np.random.default_rng(7)
    data_dir = tmp_path / "mnist"
    for prefix, count, compress in (("train", 200, True), ("t10k", 60, False)):
        labels = np.arange(count) % 10
        rng.shuffle(labels)
        suffix = ".gz" if compress else ""
        write_idx(data_dir / f"{prefix}-images-idx3-ubyte{suffix}", synthetic_images(labels, rng), compress)
        write_idx(data_dir / f"{prefix}-labels-idx1-ubyte{suffix}", labels, compress)
    return data_dir


@pytest.fixture
def small_config(mnist_dir, tmp_path):
    """ A few dozen steps of a tiny network on the synthetic data. """
    return replace(
        TrainConfig(),
        steps=30,
        batch_size=10,
        hidden=(6, 5),
        eval_every=10,
        probe_size=20,
        freeze_batches=5,
        image_size=8,
        data_dir=str(mnist_dir),
        out=str(tmp_path / "out" / "metrics.csv"),
    )


def train_args(config: TrainConfig):
    """ Command line flags reproducing a TrainConfig. """
    return [
        "--steps", str(config.steps),
        "--batch-size", str(config.batch_size),
        "--hidden", ",".join(str(h) for h in config.hidden),
        "--eval-every", str(config.eval_every),
        "--probe-size", str(config.probe_size),
        "--freeze-batches", str(config.freeze_batches),
        "--data-dir", config.data_dir,
        "--image-size", str(config.image_size),
        "--out", config.out,
        "--quiet",
    ]
