from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Tuple

import numpy as np

from data.idx import IMAGES_MAGIC, LABELS_MAGIC, read_idx
from helpers.errors import ConfigError, DataFormatError
from logger import Logger as logger
from tensor import Tensor

DEFAULT_THRESHOLD = 0.5
NUM_CLASSES = 10
MNIST_SHAPE = (28, 28)

_FILE_STEMS = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class Minibatch(NamedTuple):
    images: Tensor
    labels: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """ Images flattened to rows of [0, 1] values (or {0, 1} when binarized) with their labels. """
    images: Tensor
    labels: np.ndarray
    split: str
    image_shape: Tuple[int, int]
    binarized: bool = False

    def __post_init__(self):
        if self.images.shape[0] != len(self.labels):
            raise DataFormatError(f"{self.images.shape[0]} images but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def input_dim(self) -> int:
        return self.images.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        return replace(self, images=Tensor._wrap(self.images.data[indices], "subset"),
                       labels=self.labels[indices])

    def chunks(self, size: int) -> Iterator[Minibatch]:
        """ Consecutive batches in file order; the last one may be shorter. """
        for start in range(0, len(self), size):
            stop = start + size
            yield Minibatch(Tensor._wrap(self.images.data[start:stop], "chunk"), self.labels[start:stop])


def load_idx(images_path, labels_path, split: str = "train",
             image_shape: Optional[Tuple[int, int]] = MNIST_SHAPE) -> Dataset:
    """
    Load an IDX image/label file pair.

    Pixels are scaled by 1/255 into [0, 1].

    Args:
        images_path (str | Path): Image file, raw or gzip.
        labels_path (str | Path): Label file, raw or gzip.
        split (str): Tag stored on the dataset.
        image_shape (tuple, optional): Required rows and cols; None accepts any.

    Returns:
        Dataset: The loaded split.
    """
    pixels = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if pixels.shape[0] != labels.shape[0]:
        raise DataFormatError(f"item count mismatch: {pixels.shape[0]} images, {labels.shape[0]} labels")
    if labels.size and labels.max() >= NUM_CLASSES:
        raise DataFormatError(f"{labels_path}: label value {int(labels.max())} outside 0..{NUM_CLASSES - 1}")

    n, rows, cols = pixels.shape
    if image_shape is not None and (rows, cols) != tuple(image_shape):
        raise DataFormatError(
            f"{images_path}: images are {rows}x{cols}, expected {image_shape[0]}x{image_shape[1]}")
    images = pixels.reshape(n, rows * cols).astype(np.float64) / 255.0
    logger.debug(f"Loaded {n} {split} images of {rows}x{cols} from {images_path}")
    return Dataset(Tensor._wrap(images, "load_idx"), labels.astype(np.int64), split, (rows, cols))


def binarize(images: Tensor, threshold: float = DEFAULT_THRESHOLD) -> Tensor:
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"binarization threshold must lie in (0, 1), got {threshold}")
    return Tensor._wrap((images.data >= threshold).astype(np.float64), "binarize")


def binarize_dataset(dataset: Dataset, threshold: float = DEFAULT_THRESHOLD) -> Dataset:
    return replace(dataset, images=binarize(dataset.images, threshold), binarized=True)


def find_split_files(data_dir, split: str) -> Tuple[Path, Path]:
    """ Locate the image and label files of a split, accepting both raw and `.gz` names. """
    if split not in _FILE_STEMS:
        raise ConfigError(f"unknown split {split!r}")
    data_dir = Path(data_dir)
    found = []
    for stem in _FILE_STEMS[split]:
        candidates = [data_dir / stem, data_dir / f"{stem}.gz", data_dir / stem.replace("-idx", ".idx")]
        match = next((c for c in candidates if c.exists()), None)
        if match is None:
            raise DataFormatError(f"no {stem}[.gz] in {data_dir}")
        found.append(match)
    return found[0], found[1]


def load_split(data_dir, split: str, binarize_threshold: Optional[float] = DEFAULT_THRESHOLD,
               image_shape: Optional[Tuple[int, int]] = MNIST_SHAPE) -> Dataset:
    """ Load a split from a directory; `binarize_threshold=None` keeps the raw [0, 1] pixels. """
    images_path, labels_path = find_split_files(data_dir, split)
    dataset = load_idx(images_path, labels_path, split, image_shape)
    if binarize_threshold is not None:
        dataset = binarize_dataset(dataset, binarize_threshold)
    logger.info(f"{split} split: {len(dataset)} examples, input width {dataset.input_dim}")
    return dataset
