from data.batches import BatchIterator, next_batch
from data.dataset import (
    DEFAULT_THRESHOLD,
    MNIST_SHAPE,
    NUM_CLASSES,
    Dataset,
    Minibatch,
    binarize,
    binarize_dataset,
    find_split_files,
    load_idx,
    load_split,
)
from data.idx import IMAGES_MAGIC, LABELS_MAGIC, read_idx, write_idx
