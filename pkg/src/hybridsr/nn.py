"""Trainable CNN primitives: same-padded 2-D convolution with exact
gradients, mean-squared-error loss, Adam, He initialization, and
multiply-accumulate / parameter accounting.

Convolution is implemented as cross-correlation (the CNN convention);
weights are learned so the flip is unobservable. All arithmetic is float64.
"""

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeMismatchError

VALID_KERNEL_SIZES = (1, 3, 5)


@dataclass
class ConvLayer:
    """One convolutional layer: `out_filters` filters of size
    kernel_size x kernel_size x in_channels plus one bias per filter.
    """

    in_channels: int
    out_filters: int
    kernel_size: int
    weights: np.ndarray  # (out_filters, k, k, in_channels)
    biases: np.ndarray  # (out_filters,)

    def __post_init__(self):
        if self.kernel_size not in VALID_KERNEL_SIZES:
            raise ValueError(f"kernel size must be one of {VALID_KERNEL_SIZES}")
        expected = (self.out_filters, self.kernel_size, self.kernel_size, self.in_channels)
        if self.weights.shape != expected:
            raise ShapeMismatchError(f"weights shape {self.weights.shape} != {expected}")
        if self.biases.shape != (self.out_filters,):
            raise ShapeMismatchError(f"biases shape {self.biases.shape} != {(self.out_filters,)}")

    @property
    def parameter_count(self) -> int:
        return self.weights.size + self.biases.size


def init_layer(in_channels: int, out_filters: int, kernel_size: int, seed) -> ConvLayer:
    """He-style Gaussian init: weights ~ N(0, 2 / (k*k*in_channels)), zero biases."""
    if kernel_size % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {kernel_size}")
    rng = np.random.default_rng(seed)
    std = np.sqrt(2.0 / (kernel_size * kernel_size * in_channels))
    weights = rng.normal(0.0, std, size=(out_filters, kernel_size, kernel_size, in_channels))
    biases = np.zeros(out_filters, dtype=np.float64)
    return ConvLayer(in_channels, out_filters, kernel_size, weights, biases)


def _pad_same(batch: np.ndarray, k: int) -> np.ndarray:
    p = k // 2
    if p == 0:
        return batch
    return np.pad(batch, ((0, 0), (p, p), (p, p), (0, 0)))


def _tap(weights: np.ndarray, ky: int, kx: int) -> np.ndarray:
    # one kernel position as a contiguous (out_filters, in_channels) matrix
    return np.ascontiguousarray(weights[:, ky, kx, :])


def conv_forward_batch(layer: ConvLayer, batch: np.ndarray) -> np.ndarray:
    """Same-padded convolution of a (N, H, W, C) stack -> (N, H, W, F).

    Evaluated tap by tap as k*k GEMMs. When the layer shrinks the channel
    count the GEMM runs over the whole padded extent and small outputs are
    shift-accumulated; otherwise input blocks are copied per tap. Both
    orders keep memory traffic proportional to the smaller side.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[3] != layer.in_channels:
        raise ShapeMismatchError(
            f"input has {batch.shape[3]} channels, layer expects {layer.in_channels}"
        )
    n, h, w, c = batch.shape
    k = layer.kernel_size
    f = layer.out_filters
    if k == 1:
        flat = np.ascontiguousarray(batch).reshape(-1, c)
        out = flat @ _tap(layer.weights, 0, 0).T + layer.biases
        return out.reshape(n, h, w, f)
    padded = _pad_same(batch, k)
    out = np.zeros((n, h, w, f), dtype=np.float64)
    if f < c:
        hp, wp = h + k - 1, w + k - 1
        p2 = padded.reshape(-1, c)
        for ky in range(k):
            for kx in range(k):
                t = (p2 @ _tap(layer.weights, ky, kx).T).reshape(n, hp, wp, f)
                out += t[:, ky : ky + h, kx : kx + w, :]
    else:
        out2d = out.reshape(-1, f)
        for ky in range(k):
            for kx in range(k):
                blk = np.ascontiguousarray(
                    padded[:, ky : ky + h, kx : kx + w, :]
                ).reshape(-1, c)
                out2d += blk @ _tap(layer.weights, ky, kx).T
    out += layer.biases
    return out


def conv_forward(layer: ConvLayer, image: np.ndarray) -> np.ndarray:
    """Same-padded convolution of one (H, W, C) tensor -> (H, W, F)."""
    image = np.asarray(image, dtype=np.float64)
    return conv_forward_batch(layer, image[np.newaxis])[0]


def conv_backward_batch(layer: ConvLayer, batch: np.ndarray, upstream: np.ndarray):
    """Exact gradients of `conv_forward_batch`.

    Returns (input_grad, weight_grad, bias_grad). Weight and bias gradients
    are summed over the batch. The bias gradient is the per-filter sum of
    the upstream map; the weight gradient correlates the padded input with
    the upstream; the input gradient scatters each upstream tap through the
    kernel (the full correlation with the spatially flipped weights).
    """
    batch = np.asarray(batch, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    n, h, w, c = batch.shape
    if upstream.shape != (n, h, w, layer.out_filters):
        raise ShapeMismatchError(
            f"upstream shape {upstream.shape} != {(n, h, w, layer.out_filters)}"
        )
    k = layer.kernel_size
    f = layer.out_filters
    g2d = np.ascontiguousarray(upstream).reshape(n * h * w, f)
    bias_grad = g2d.sum(axis=0)

    if k == 1:
        flat = np.ascontiguousarray(batch).reshape(-1, c)
        weight_grad = (g2d.T @ flat).reshape(layer.weights.shape)
        input_grad = (g2d @ _tap(layer.weights, 0, 0)).reshape(batch.shape)
        return input_grad, weight_grad, bias_grad

    padded = _pad_same(batch, k)
    weight_grad = np.empty_like(layer.weights)
    pad_grad = np.zeros_like(padded)
    embed = np.zeros(padded.shape[:3] + (f,), dtype=np.float64) if f < c else None
    for ky in range(k):
        for kx in range(k):
            if embed is None:
                blk = np.ascontiguousarray(
                    padded[:, ky : ky + h, kx : kx + w, :]
                ).reshape(-1, c)
                weight_grad[:, ky, kx, :] = g2d.T @ blk
            else:
                # embed the small upstream at the tap offset and stream one
                # GEMM against the contiguous padded input
                embed[...] = 0.0
                embed[:, ky : ky + h, kx : kx + w, :] = upstream
                weight_grad[:, ky, kx, :] = embed.reshape(-1, f).T @ padded.reshape(-1, c)
            pad_grad[:, ky : ky + h, kx : kx + w, :] += (
                g2d @ _tap(layer.weights, ky, kx)
            ).reshape(n, h, w, c)
    p = k // 2
    input_grad = np.ascontiguousarray(pad_grad[:, p : p + h, p : p + w, :])
    return input_grad, weight_grad, bias_grad


def conv_backward(layer: ConvLayer, image: np.ndarray, upstream: np.ndarray):
    """Single-image wrapper over `conv_backward_batch`."""
    image = np.asarray(image, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    input_grad, weight_grad, bias_grad = conv_backward_batch(
        layer, image[np.newaxis], upstream[np.newaxis]
    )
    return input_grad[0], weight_grad, bias_grad


def mse_loss(prediction: np.ndarray, target: np.ndarray):
    """Per-element mean squared error and its gradient w.r.t. the prediction.

    loss = mean((prediction - target)^2) over every element present
    (batch x height x width x channels); grad = 2 (prediction - target) / count.
    """
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ShapeMismatchError(f"shape mismatch: {prediction.shape} vs {target.shape}")
    diff = prediction - target
    count = diff.size
    loss = float(np.mean(diff * diff))
    grad = (2.0 / count) * diff
    return loss, grad


@dataclass
class AdamState:
    """Adam optimizer state: one first/second moment slot per parameter array."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_init(params, learning_rate: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    state = AdamState(learning_rate, beta1, beta2, epsilon)
    state.m = [np.zeros_like(p) for p in params]
    state.v = [np.zeros_like(p) for p in params]
    return state


def adam_step(state: AdamState, params, grads) -> None:
    """One bias-corrected Adam update, applied to `params` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError(
            f"parameter/gradient count mismatch: {len(params)} params, "
            f"{len(grads)} grads, state holds {len(state.m)}"
        )
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeMismatchError(f"param/grad shape mismatch: {p.shape} vs {g.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


@dataclass(frozen=True)
class LayerDims:
    """Shape facts for one conv layer placed in a network: input channels,
    kernel size, filter count, and output feature-map dims."""

    in_channels: int
    kernel_size: int
    out_filters: int
    out_h: int
    out_w: int

    @property
    def parameter_count(self) -> int:
        return self.out_filters * (self.kernel_size**2 * self.in_channels + 1)

    @property
    def mac_count(self) -> int:
        # n_{l-1} * s_l^2 * n_l * m_l^2 for an m_h x m_w output map
        return self.in_channels * self.kernel_size**2 * self.out_filters * self.out_h * self.out_w


@dataclass(frozen=True)
class ComplexityReport:
    layers: tuple
    total_parameters: int
    total_macs: int

    @property
    def depth(self) -> int:
        return len(self.layers)


def complexity(layer_dims) -> ComplexityReport:
    """Aggregate per-layer parameter and multiply-accumulate counts."""
    layers = tuple(layer_dims)
    return ComplexityReport(
        layers=layers,
        total_parameters=sum(d.parameter_count for d in layers),
        total_macs=sum(d.mac_count for d in layers),
    )
