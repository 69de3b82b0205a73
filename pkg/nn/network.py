from dataclasses import dataclass, field
from typing import Any, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from batchnorm import StatsSource
from helpers.errors import ConfigError, DimensionError, StateError
from nn.functional import softmax_cross_entropy
from nn.layers import NONLINEARITIES, Affine, BatchNorm, Layer, Mode, is_nonlinearity
from tensor import Tensor, as_tensor


@dataclass
class NetworkSpec:
    """
    Ordered layer list ending in logits, scored with softmax cross-entropy.

    A NetworkSpec is owned by one trainer at a time; use `clone` to hand a
    snapshot to an evaluator.
    """
    layers: List[Layer]
    num_classes: int
    mode: Mode = Mode.TRAIN
    stats_source: StatsSource = StatsSource.POPULATION

    def __post_init__(self):
        self.validate()

    @property
    def input_dim(self) -> int:
        for layer in self.layers:
            if isinstance(layer, Affine):
                return layer.W.shape[0]
            if isinstance(layer, BatchNorm):
                return layer.params.dim
        raise DimensionError("network has no layer that fixes its input width")

    def validate(self):
        width = self.input_dim
        for layer in self.layers:
            width = layer.output_dim(width)
        if width != self.num_classes:
            raise DimensionError(f"network ends with width {width}, expected {self.num_classes} classes")

    def clone(self) -> "NetworkSpec":
        return NetworkSpec([layer.clone() for layer in self.layers], self.num_classes,
                           self.mode, self.stats_source)

    def batchnorm_layers(self) -> List[Tuple[int, BatchNorm]]:
        return [(i, layer) for i, layer in enumerate(self.layers) if isinstance(layer, BatchNorm)]

    def activation_indices(self) -> List[int]:
        """ Layer index of every nonlinearity, i.e. of every hidden layer's output. """
        return [i for i, layer in enumerate(self.layers) if is_nonlinearity(layer)]

    def parameters(self) -> Iterator[Tuple[int, str, Tensor]]:
        for i, layer in enumerate(self.layers):
            for name, tensor in layer.parameters().items():
                yield i, name, tensor

    def parameter_count(self) -> int:
        return sum(tensor.size for _, _, tensor in self.parameters())

    def check_ready(self, mode: Mode):
        if mode is not Mode.INFERENCE:
            return
        for i, layer in self.batchnorm_layers():
            stats = layer.stats
            ready = stats.ema_updates >= 1 if self.stats_source is StatsSource.EMA else stats.frozen
            if not ready:
                raise StateError(f"batchnorm layer {i} has no {self.stats_source.value} statistics; "
                                 "freeze the network before inference")


@dataclass
class Trace:
    """ Everything a forward pass leaves behind for the backward pass and for probes. """
    mode: Mode
    inputs: List[Tensor] = field(default_factory=list)
    caches: List[Any] = field(default_factory=list)
    logits: Optional[Tensor] = None
    loss: Optional[float] = None
    dlogits: Optional[Tensor] = None

    def layer_input(self, index: int) -> Tensor:
        return self.inputs[index]


@dataclass
class Gradients:
    """ Parameter gradients, one dict per layer with the same keys as `Layer.parameters`. """
    layers: List[dict]

    def flat(self) -> List[Tensor]:
        return [tensor for grads in self.layers for tensor in grads.values()]


def network_forward(net: NetworkSpec, x: Tensor, mode: Optional[Mode] = None,
                    labels=None) -> Tuple[Trace, Optional[float]]:
    """
    Run every layer in order.

    Args:
        net (NetworkSpec): The network.
        x (Tensor): Inputs [m, d_in].
        mode (Mode, optional): Overrides `net.mode`; train-mode BN needs m >= 2.
        labels (array, optional): Class indices; when given the loss and dlogits are computed.

    Returns:
        tuple: The Trace and the loss (None without labels).
    """
    mode = mode or net.mode
    net.check_ready(mode)
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise DimensionError(f"network expects inputs [m, {net.input_dim}], got {x.shape}")

    trace = Trace(mode=mode)
    out = x
    for layer in net.layers:
        trace.inputs.append(out)
        out, cache = layer.forward(out, mode, net.stats_source)
        trace.caches.append(cache)
    trace.logits = out

    if labels is not None:
        trace.loss, trace.dlogits = softmax_cross_entropy(out, labels)
    return trace, trace.loss


def network_backward(net: NetworkSpec, trace: Trace, dloss: Optional[Tensor] = None) -> Gradients:
    if trace.mode is not Mode.TRAIN:
        raise StateError("backward needs a train-mode trace")
    dy = dloss if dloss is not None else trace.dlogits
    if dy is None:
        raise StateError("trace has no loss gradient; pass labels to network_forward")
    grads = [None] * len(net.layers)
    for i in reversed(range(len(net.layers))):
        dy, grads[i] = net.layers[i].backward(trace.caches[i], dy)
    return Gradients(grads)


def predict(net: NetworkSpec, x: Tensor, mode: Optional[Mode] = None) -> np.ndarray:
    trace, _ = network_forward(net, x, mode)
    return np.argmax(trace.logits.data, axis=1)


def build_mlp(input_dim: int, hidden: Sequence[int], num_classes: int, nonlinearity: str = "sigmoid",
              init_std: float = 0.1, rng: Optional[np.random.Generator] = None) -> NetworkSpec:
    """
    Baseline fully-connected network: [Affine -> g] per hidden layer, then Affine to the classes.

    Weights are drawn from N(0, init_std^2), biases start at zero.
    """
    if nonlinearity not in NONLINEARITIES:
        raise ConfigError(f"unknown nonlinearity {nonlinearity!r}")
    rng = rng if rng is not None else np.random.default_rng(0)
    layers: List[Layer] = []
    width = input_dim
    for units in hidden:
        layers.append(Affine(rng.normal(0.0, init_std, (width, units)), np.zeros(units)))
        layers.append(NONLINEARITIES[nonlinearity]())
        width = units
    layers.append(Affine(rng.normal(0.0, init_std, (width, num_classes)), np.zeros(num_classes)))
    return NetworkSpec(layers, num_classes)
