from tensor.tensor import (
    Tensor,
    add,
    as_tensor,
    div,
    elementwise,
    matmul,
    mul,
    reduce_mean_axis0,
    reduce_sum_axis0,
    sqrt,
    sub,
)

__all__ = [
    "Tensor",
    "add",
    "as_tensor",
    "div",
    "elementwise",
    "matmul",
    "mul",
    "reduce_mean_axis0",
    "reduce_sum_axis0",
    "sqrt",
    "sub",
]
