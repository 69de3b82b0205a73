from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np

DEFAULT_STEP = 1e-5


def numerical_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = DEFAULT_STEP,
                       indices: Optional[Iterable[Tuple[int, ...]]] = None) -> np.ndarray:
    """
    Central finite differences (f(x+h) - f(x-h)) / 2h, coordinate by coordinate.

    Args:
        f (callable): Scalar function of an array shaped like x.
        x (np.ndarray): Point of evaluation; not modified.
        h (float): Step.
        indices (iterable, optional): Coordinates to evaluate; others stay 0. Defaults to all.

    Returns:
        np.ndarray: Gradient estimate shaped like x.
    """
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in (indices if indices is not None else np.ndindex(x.shape)):
        original = x[idx]
        x[idx] = original + h
        f_plus = f(x)
        x[idx] = original - h
        f_minus = f(x)
        x[idx] = original
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic, numeric) -> float:
    """ ||a - n|| / (||a|| + ||n||); the absolute difference when both are ~0. """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    diff = float(np.linalg.norm(analytic - numeric))
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    if scale < 1e-12:
        return diff
    return diff / scale


def sample_indices(shape: Tuple[int, ...], count: int, rng: np.random.Generator) -> List[Tuple[int, ...]]:
    """ Up to `count` distinct coordinates of an array of the given shape. """
    size = int(np.prod(shape))
    flat = rng.choice(size, size=min(count, size), replace=False)
    return [tuple(int(v) for v in np.unravel_index(i, shape)) for i in np.sort(flat)]
