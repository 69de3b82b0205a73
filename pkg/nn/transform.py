from dataclasses import replace
from typing import Collection, Iterable, List, Optional

import numpy as np

from batchnorm import (
    DEFAULT_EMA_DECAY,
    DEFAULT_EPS,
    BnStats,
    bn_accumulate_stats,
    bn_fold,
    bn_update_ema,
)
from helpers.errors import StateError
from logger import Logger as logger
from nn.layers import Affine, BatchNorm, Layer, Mode, is_nonlinearity
from nn.network import NetworkSpec, Trace, network_forward
from tensor import Tensor


def batch_normalize_network(net: NetworkSpec, designate: Optional[Collection[int]] = None,
                            eps: float = DEFAULT_EPS) -> NetworkSpec:
    """
    Insert a BN transform between every designated Affine and its nonlinearity.

    The Affine loses its bias since the mean subtraction cancels it. New
    transforms start at gamma=1, beta=0 with empty statistics.

    Args:
        net (NetworkSpec): Network N.
        designate (collection, optional): Hidden-layer indices (0-based, in order of the
            Affine->nonlinearity blocks) to normalize. Defaults to all of them.
        eps (float): Variance floor of the inserted transforms.

    Returns:
        NetworkSpec: The training network, in train mode.
    """
    layers: List[Layer] = []
    block = 0
    source = net.layers
    for i, layer in enumerate(source):
        next_layer = source[i + 1] if i + 1 < len(source) else None
        if isinstance(layer, Affine) and next_layer is not None and is_nonlinearity(next_layer):
            if designate is None or block in designate:
                layers.append(Affine(layer.W.copy()))
                layers.append(BatchNorm.identity(layer.W.shape[1], eps))
            else:
                layers.append(layer.clone())
            block += 1
            continue
        layers.append(layer.clone())
    inserted = sum(isinstance(layer, BatchNorm) for layer in layers) - len(net.batchnorm_layers())
    logger.debug(f"Inserted {inserted} batchnorm layers")
    return NetworkSpec(layers, net.num_classes, Mode.TRAIN, net.stats_source)


def update_running_stats(net: NetworkSpec, trace: Trace, decay: float = DEFAULT_EMA_DECAY):
    """ Fold the mini-batch moments of a train-mode trace into every BN layer's moving average. """
    if trace.mode is not Mode.TRAIN:
        raise StateError("moving averages can only be updated from a train-mode trace")
    for i, layer in net.batchnorm_layers():
        mu_b, sigma2_b, m = trace.caches[i].batch_stats
        layer.stats = bn_update_ema(layer.stats, mu_b, sigma2_b, m, decay)


def freeze_network(net_tr: NetworkSpec, batches: Iterable[Tensor]) -> NetworkSpec:
    """
    Estimate E[x] and Var[x] of every BN layer from training batches and switch to inference.

    All BN layers are measured in the same train-mode passes with the final
    weights. Moving averages already tracked are kept.
    """
    net_inf = net_tr.clone()
    bn_layers = net_inf.batchnorm_layers()
    for _, layer in bn_layers:
        empty = BnStats.empty(layer.params.dim)
        layer.stats = replace(layer.stats, mean=empty.mean, var=empty.var, batches_seen=0, batch_size=None)

    count = 0
    for x in batches:
        trace, _ = network_forward(net_inf, x, Mode.TRAIN)
        for i, layer in bn_layers:
            layer.stats = bn_accumulate_stats(trace.caches[i].batch_stats, layer.stats)
        count += 1
    if count == 0:
        raise StateError("cannot freeze a network from an empty batch stream")

    logger.debug(f"Froze {len(bn_layers)} batchnorm layers over {count} batches")
    net_inf.mode = Mode.INFERENCE
    return net_inf


def fold_network(net_inf: NetworkSpec) -> NetworkSpec:
    """
    Replace each Affine->BN pair by a single Affine with W' = W diag(scale), b' = b*scale + shift.

    A BN layer without a preceding Affine becomes a diagonal Affine. A network
    without BN layers behaves the same in both modes and comes back unchanged.
    """
    if not net_inf.batchnorm_layers():
        return NetworkSpec([layer.clone() for layer in net_inf.layers], net_inf.num_classes,
                           Mode.INFERENCE, net_inf.stats_source)
    if net_inf.mode is not Mode.INFERENCE:
        raise StateError("only an inference-mode network can be folded")
    net_inf.check_ready(Mode.INFERENCE)

    layers: List[Layer] = []
    for layer in net_inf.layers:
        if not isinstance(layer, BatchNorm):
            layers.append(layer.clone())
            continue
        folded = bn_fold(layer.params, layer.stats, layer.eps, net_inf.stats_source)
        previous = layers[-1] if layers else None
        if isinstance(previous, Affine):
            bias = folded.shift if previous.b is None else previous.b * folded.scale + folded.shift
            layers[-1] = Affine(previous.W * folded.scale, bias)
        else:
            layers.append(Affine(Tensor(np.diag(folded.scale.data)), folded.shift))
    return NetworkSpec(layers, net_inf.num_classes, Mode.INFERENCE, net_inf.stats_source)
