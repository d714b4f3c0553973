"""Dense tensor helpers on top of numpy.

Tensors are plain ``np.ndarray`` objects stored as float32 by default.
Operations keep the dtype they are given so that gradient checks can run
the same code in float64.
"""
import numpy as np

from errors import NumericalError, ShapeError

DTYPE = np.float32


def as_tensor(values, dtype=DTYPE):
    """Convert to a C-contiguous array of the working dtype."""
    return np.ascontiguousarray(values, dtype=dtype)


def check_finite(array, what="tensor"):
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NumericalError(f"{what} has {bad} non-finite value(s)")
    return array


def matmul(a, b):
    """Matrix product of an m×k and a k×n tensor."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matmul result")


def softmax2d(e):
    """Softmax over all entries of a 2-d map (max-subtracted)."""
    e = np.asarray(e)
    if e.ndim != 2:
        raise ShapeError(f"softmax2d expects a 2-d map, got shape {e.shape}")
    check_finite(e, "softmax input")
    shifted = e - e.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def global_norm(arrays):
    return float(np.sqrt(sum(float(np.sum(np.square(a, dtype=np.float64))) for a in arrays)))
