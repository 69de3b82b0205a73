from nn.checkpoint import load_checkpoint, save_checkpoint
from nn.functional import (
    affine_backward,
    affine_forward,
    relu_backward,
    relu_forward,
    sigmoid_backward,
    sigmoid_forward,
    softmax_cross_entropy,
)
from nn.layers import NONLINEARITIES, Affine, BatchNorm, Layer, Mode, Relu, Sigmoid
from nn.network import (
    Gradients,
    NetworkSpec,
    Trace,
    build_mlp,
    network_backward,
    network_forward,
    predict,
)
from nn.transform import (
    batch_normalize_network,
    fold_network,
    freeze_network,
    update_running_stats,
)
