import json
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from batchnorm import BnParams, BnStats, StatsSource
from helpers.errors import BatchNormError, DataFormatError
from logger import Logger as logger
from nn.layers import NONLINEARITIES, Affine, BatchNorm, Mode
from nn.network import NetworkSpec
from tensor import Tensor

FORMAT_VERSION = 1


def save_checkpoint(net: NetworkSpec, path, step: Optional[int] = None) -> Path:
    """
    Write a network as an `.npz` archive without pickles.

    Layer kinds, flags and counters go into a JSON `meta` entry; every
    parameter and statistic is stored as its own float64 array, so payloads
    round-trip bit-exactly.

    Args:
        net (NetworkSpec): The network.
        path (str | Path): Target file.
        step (int, optional): Training step recorded in the metadata.

    Returns:
        Path: The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    layers_meta = []
    arrays = {}
    for i, layer in enumerate(net.layers):
        entry = {"kind": layer.kind}
        if isinstance(layer, Affine):
            entry["bias"] = layer.b is not None
            arrays[f"{i}.W"] = layer.W.data
            if layer.b is not None:
                arrays[f"{i}.b"] = layer.b.data
        elif isinstance(layer, BatchNorm):
            stats = layer.stats
            entry.update(eps=layer.eps, batches_seen=stats.batches_seen,
                         ema_updates=stats.ema_updates, batch_size=stats.batch_size)
            arrays[f"{i}.gamma"] = layer.params.gamma.data
            arrays[f"{i}.beta"] = layer.params.beta.data
            arrays[f"{i}.mean"] = stats.mean.data
            arrays[f"{i}.var"] = stats.var.data
            arrays[f"{i}.ema_mean"] = stats.ema_mean.data
            arrays[f"{i}.ema_var"] = stats.ema_var.data
        layers_meta.append(entry)

    meta = {
        "format_version": FORMAT_VERSION,
        "mode": net.mode.value,
        "stats_source": net.stats_source.value,
        "num_classes": net.num_classes,
        "step": step,
        "layers": layers_meta,
    }
    with open(path, "wb") as f:
        np.savez(f, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    logger.debug(f"Checkpoint written to {path}")
    return path


def load_checkpoint(path) -> Tuple[NetworkSpec, dict]:
    """ Read a checkpoint written by `save_checkpoint`; returns the network and its metadata. """
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"checkpoint {path} does not exist")
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {key: archive[key] for key in archive.files}
    except (OSError, ValueError) as e:
        raise DataFormatError(f"checkpoint {path} is not a readable archive: {e}")

    try:
        meta = json.loads(str(arrays.pop("meta")))
    except (KeyError, json.JSONDecodeError):
        raise DataFormatError(f"checkpoint {path} has no valid meta entry")
    if meta.get("format_version") != FORMAT_VERSION:
        raise DataFormatError(f"checkpoint format_version {meta.get('format_version')} is not supported")

    try:
        layers = [_load_layer(i, entry, arrays) for i, entry in enumerate(meta["layers"])]
        net = NetworkSpec(layers, int(meta["num_classes"]), Mode(meta["mode"]),
                          StatsSource(meta.get("stats_source", StatsSource.POPULATION.value)))
    except KeyError as e:
        raise DataFormatError(f"checkpoint {path} is missing field {e}")
    except (ValueError, BatchNormError) as e:
        raise DataFormatError(f"checkpoint {path} is inconsistent: {e}")
    return net, meta


def _load_layer(i: int, entry: dict, arrays: dict):
    kind = entry["kind"]
    if kind == "affine":
        bias = Tensor(arrays[f"{i}.b"]) if entry["bias"] else None
        return Affine(Tensor(arrays[f"{i}.W"]), bias)
    if kind == "batchnorm":
        stats = BnStats(
            mean=Tensor(arrays[f"{i}.mean"]),
            var=Tensor(arrays[f"{i}.var"]),
            ema_mean=Tensor(arrays[f"{i}.ema_mean"]),
            ema_var=Tensor(arrays[f"{i}.ema_var"]),
            batches_seen=int(entry["batches_seen"]),
            ema_updates=int(entry["ema_updates"]),
            batch_size=entry["batch_size"],
        )
        params = BnParams(Tensor(arrays[f"{i}.gamma"]), Tensor(arrays[f"{i}.beta"]))
        return BatchNorm(params, stats, float(entry["eps"]))
    if kind in NONLINEARITIES:
        return NONLINEARITIES[kind]()
    raise DataFormatError(f"unknown layer kind {kind!r} at position {i}")
