from numbers import Real
from typing import Callable, Iterable, Union

import numpy as np

from helpers.errors import BatchTooSmallError, DimensionError, NumericError


class Tensor:
    """
    Dense row-major float64 array with a shape.

    The payload is read-only. The only mutators are `add_` and `assign_`,
    which rebind the payload instead of writing into it, so arrays handed
    out earlier never change under the caller.
    """
    __slots__ = ("_data",)
    # make numpy scalars defer to Tensor operators
    __array_priority__ = 1000

    def __init__(self, values):
        self._data = _freeze(np.array(values, dtype=np.float64), "construct")

    @classmethod
    def _wrap(cls, array: np.ndarray, op: str = "operation") -> "Tensor":
        tensor = cls.__new__(cls)
        tensor._data = _freeze(np.asarray(array, dtype=np.float64), op)
        return tensor

    @classmethod
    def zeros(cls, shape) -> "Tensor":
        return cls._wrap(np.zeros(shape))

    @classmethod
    def ones(cls, shape) -> "Tensor":
        return cls._wrap(np.ones(shape))

    @classmethod
    def full(cls, shape, value: float) -> "Tensor":
        return cls._wrap(np.full(shape, value, dtype=np.float64))

    @property
    def shape(self) -> tuple:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def data(self) -> np.ndarray:
        return self._data

    def numpy(self) -> np.ndarray:
        """ Writable copy of the payload. """
        return self._data.copy()

    def copy(self) -> "Tensor":
        return Tensor(self._data)

    def item(self) -> float:
        return float(self._data.item())

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        try:
            return Tensor._wrap(self._data.reshape(shape), "reshape")
        except ValueError:
            raise DimensionError(f"cannot reshape {self.shape} into {shape}")

    def transpose(self, *axes) -> "Tensor":
        return Tensor._wrap(np.ascontiguousarray(self._data.transpose(*axes)), "transpose")

    @property
    def T(self) -> "Tensor":
        if self.ndim != 2:
            raise DimensionError(f"T needs a matrix, got shape {self.shape}")
        return self.transpose()

    def sum(self, axis=None) -> "Tensor":
        return Tensor._wrap(self._data.sum(axis=axis), "sum")

    def mean(self, axis=None) -> "Tensor":
        return Tensor._wrap(self._data.mean(axis=axis), "mean")

    def add_(self, delta: "TensorLike") -> "Tensor":
        """ In-place update used by the optimizer; shapes must match exactly. """
        delta = as_tensor(delta)
        if delta.shape != self.shape:
            raise DimensionError(f"add_: shapes {self.shape} and {delta.shape} differ")
        self._data = _freeze(self._data + delta.data, "add_")
        return self

    def assign_(self, values: "TensorLike") -> "Tensor":
        values = as_tensor(values)
        if values.shape != self.shape:
            raise DimensionError(f"assign_: shapes {self.shape} and {values.shape} differ")
        self._data = _freeze(values.data.copy(), "assign_")
        return self

    def __getitem__(self, index) -> "Tensor":
        return Tensor._wrap(np.array(self._data[index]), "index")

    def __len__(self) -> int:
        return len(self._data)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data.copy() if copy else self._data
        return self._data.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._data, other._data))

    __hash__ = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={np.array2string(self._data, precision=6)})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return Tensor._wrap(-self._data, "neg")

    def __pow__(self, exponent: float):
        return elementwise(self, lambda v: np.power(v, exponent))

    def __matmul__(self, other):
        return matmul(self, other)


TensorLike = Union[Tensor, np.ndarray, Real, Iterable]


def _freeze(array: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NumericError(f"{op} produced non-finite values")
    array.flags.writeable = False
    return array


def as_tensor(value: TensorLike) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    # equal shapes, a scalar, or a length-d vector against the rows of an m×d matrix
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        return
    if a.ndim == 1 and b.ndim == 2 and b.shape[1] == a.shape[0]:
        return
    raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _binary(a: TensorLike, b: TensorLike, ufunc: Callable, op: str) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, op)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return Tensor._wrap(ufunc(a.data, b.data), op)


def add(a: TensorLike, b: TensorLike) -> Tensor:
    return _binary(a, b, np.add, "add")


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    return _binary(a, b, np.subtract, "sub")


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    return _binary(a, b, np.multiply, "mul")


def div(a: TensorLike, b: TensorLike) -> Tensor:
    return _binary(a, b, np.divide, "div")


def elementwise(a: TensorLike, f: Callable[[np.ndarray], np.ndarray]) -> Tensor:
    """
    Apply a vectorised scalar map to every element.

    Args:
        a (Tensor): The input.
        f (callable): Scalar map written against numpy arrays, e.g. `np.exp`.

    Returns:
        Tensor: Same shape as `a`.
    """
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        result = np.asarray(f(a.data), dtype=np.float64)
    if result.shape != a.shape:
        raise DimensionError(f"elementwise map changed shape {a.shape} to {result.shape}")
    return Tensor._wrap(result, "elementwise")


def sqrt(a: TensorLike) -> Tensor:
    return elementwise(a, np.sqrt)


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return Tensor._wrap(a.data @ b.data, "matmul")


def reduce_sum_axis0(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"reduce_sum_axis0 needs a matrix, got shape {a.shape}")
    return Tensor._wrap(a.data.sum(axis=0), "reduce_sum_axis0")


def reduce_mean_axis0(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"reduce_mean_axis0 needs a matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise BatchTooSmallError("reduce_mean_axis0 over an empty batch")
    # centred on the first row so constant columns come out exact
    first = a.data[0]
    return Tensor._wrap(first + (a.data - first).sum(axis=0) / a.shape[0], "reduce_mean_axis0")
