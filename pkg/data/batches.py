import numpy as np

from data.dataset import Dataset, Minibatch
from helpers.errors import ConfigError
from tensor import Tensor


class BatchIterator:
    """
    Endless seeded mini-batch stream over a dataset.

    Each epoch draws a fresh permutation and yields N // m batches; the
    ragged remainder of the permutation is dropped so every batch has
    exactly m examples.
    """

    def __init__(self, dataset: Dataset, batch_size: int, seed=0):
        """
        Args:
            dataset (Dataset): Examples to iterate over.
            batch_size (int): m, at most len(dataset).
            seed (int | np.random.SeedSequence): Seed of the permutation stream.
        """
        if len(dataset) == 0:
            raise ConfigError("cannot iterate over an empty dataset")
        if not 1 <= batch_size <= len(dataset):
            raise ConfigError(f"batch size {batch_size} must lie in [1, {len(dataset)}]")
        self.dataset = dataset
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)
        self.epoch = 0
        self._order = None
        self._position = 0

    @property
    def batches_per_epoch(self) -> int:
        return len(self.dataset) // self.batch_size

    def _start_epoch(self):
        self._order = self.rng.permutation(len(self.dataset))
        self._position = 0
        self.epoch += 1

    def __iter__(self):
        return self

    def __next__(self) -> Minibatch:
        return next_batch(self)


def next_batch(iterator: BatchIterator) -> Minibatch:
    if iterator._order is None or iterator._position + iterator.batch_size > len(iterator._order):
        iterator._start_epoch()
    start = iterator._position
    indices = iterator._order[start:start + iterator.batch_size]
    iterator._position += iterator.batch_size
    dataset = iterator.dataset
    return Minibatch(Tensor._wrap(dataset.images.data[indices], "next_batch"), dataset.labels[indices])
