"""Rank-3 image tensors and the elementwise ops everything else builds on.

A tensor is a float64 numpy array of shape (height, width, channels),
C-contiguous, i.e. row-major with interleaved channels. All compute is done
in 64-bit; quantization to 8-bit happens only at image write-out.
"""

import numpy as np


class ShapeMismatchError(ValueError):
    """Operands do not have compatible shapes."""


def as_tensor(values) -> np.ndarray:
    """Coerce `values` to a float64 (H, W, C) tensor, validating the shape.

    Accepts nested lists or arrays. 2-D input is promoted to a single
    channel. Every dimension must be >= 1.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise ShapeMismatchError(f"expected a rank-3 (H, W, C) array, got rank {arr.ndim}")
    if min(arr.shape) < 1:
        raise ShapeMismatchError(f"all dimensions must be >= 1, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


def concat_channels(inputs) -> np.ndarray:
    """Stack tensors along the channel axis, in list order.

    All inputs must share height and width; output channel count is the sum
    of the input channel counts and spatial values are preserved exactly.
    """
    tensors = [as_tensor(t) for t in inputs]
    if not tensors:
        raise ShapeMismatchError("concat_channels requires at least one input")
    h, w = tensors[0].shape[:2]
    for t in tensors[1:]:
        if t.shape[:2] != (h, w):
            raise ShapeMismatchError(
                f"concat_channels inputs disagree spatially: {(h, w)} vs {t.shape[:2]}"
            )
    return np.concatenate(tensors, axis=2)


def relu(x) -> np.ndarray:
    """Elementwise max(x, 0)."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(x, upstream_grad) -> np.ndarray:
    """Gradient of relu: passes upstream where x > 0, zero elsewhere.

    The derivative at exactly 0 is taken as 0.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(upstream_grad, dtype=np.float64)
    require_same_shape(x, g)
    return np.where(x > 0.0, g, 0.0)
