"""The super-resolution architectures: small DAGs of interpolation,
convolution, ReLU and channel-concat nodes with a uniform forward/backward
interface and a checksummed binary model file format.

Scale-2 architectures: I2C, CI2, CB2SNN plus the single-interpolation
baselines BicubicCNN, BilinearCNN, NNCNN. Scale-4: I4C and I2CI2C.
"""

import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import interp, nn
from .interp import InterpKind
from .tensor import ShapeMismatchError, as_tensor


class ModelFileError(ValueError):
    """A model file could not be loaded."""


class BadMagicError(ModelFileError):
    pass


class UnsupportedVersionError(ModelFileError):
    pass


class TruncatedFileError(ModelFileError):
    pass


class ChecksumMismatchError(ModelFileError):
    pass


class MetadataError(ModelFileError):
    pass


@dataclass(frozen=True)
class Node:
    """One graph node; `inputs` are value indices (0 is the network input,
    node i produces value i+1)."""

    op: str  # "interp" | "conv" | "relu" | "concat"
    inputs: tuple
    kind: InterpKind = None
    factor: int = None
    layer: int = None


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    scale: int
    nodes: tuple
    layer_shapes: tuple  # (in_channels, out_filters, kernel_size) per conv layer
    final_relu: bool = False


@dataclass
class Model:
    spec: ArchitectureSpec
    layers: list  # ConvLayer, in graph order
    seed: int = 0


ARCH_SCALES = {
    "I2C": 2,
    "CI2": 2,
    "CB2SNN": 2,
    "BicubicCNN": 2,
    "BilinearCNN": 2,
    "NNCNN": 2,
    "I4C": 4,
    "I2CI2C": 4,
}

_BASELINE_KINDS = {
    "BicubicCNN": InterpKind.BICUBIC,
    "BilinearCNN": InterpKind.BILINEAR,
    "NNCNN": InterpKind.NEAREST,
}


class _GraphBuilder:
    def __init__(self):
        self.nodes = []
        self.layer_shapes = []

    def _add(self, node: Node) -> int:
        self.nodes.append(node)
        return len(self.nodes)  # value index of this node's output

    def interp(self, src: int, kind: InterpKind, factor: int) -> int:
        return self._add(Node("interp", (src,), kind=kind, factor=factor))

    def conv(self, src: int, in_ch: int, out_f: int, k: int) -> int:
        self.layer_shapes.append((in_ch, out_f, k))
        return self._add(Node("conv", (src,), layer=len(self.layer_shapes) - 1))

    def relu(self, src: int) -> int:
        return self._add(Node("relu", (src,)))

    def concat(self, srcs) -> int:
        return self._add(Node("concat", tuple(srcs)))

    def conv_relu(self, src: int, in_ch: int, out_f: int, k: int) -> int:
        return self.relu(self.conv(src, in_ch, out_f, k))


def _three_interps(g: _GraphBuilder, src: int, factor: int):
    return (
        g.interp(src, InterpKind.BICUBIC, factor),
        g.interp(src, InterpKind.BILINEAR, factor),
        g.interp(src, InterpKind.NEAREST, factor),
    )


def _build_graph(name: str) -> _GraphBuilder:
    g = _GraphBuilder()
    if name == "I2C":
        c = g.concat(_three_interps(g, 0, 2))  # 9 channels
        x = g.conv_relu(c, 9, 8, 5)
        x = g.conv_relu(x, 8, 4, 3)
        g.conv(x, 4, 3, 3)
    elif name == "CI2":
        x = g.conv_relu(0, 3, 16, 5)
        x = g.conv_relu(x, 16, 8, 3)
        x = g.conv_relu(x, 8, 8, 3)
        c = g.concat(_three_interps(g, x, 2))  # 24 channels
        g.conv(c, 24, 3, 3)
    elif name == "CB2SNN":
        x = g.conv_relu(0, 3, 8, 5)
        x = g.conv_relu(x, 8, 8, 3)
        x = g.conv_relu(x, 8, 3, 1)
        up = g.interp(x, InterpKind.BICUBIC, 2)
        skip = g.interp(0, InterpKind.NEAREST, 2)
        c = g.concat((up, skip))  # 6 channels, skip occupies channels 3-5
        g.conv(c, 6, 3, 3)
    elif name == "I4C":
        branches = [g.conv_relu(b, 3, 6, 5) for b in _three_interps(g, 0, 4)]
        c = g.concat(branches)  # 18 channels
        x = g.conv_relu(c, 18, 16, 5)
        x = g.conv_relu(x, 16, 8, 3)
        x = g.conv_relu(x, 8, 8, 1)
        g.conv(x, 8, 3, 3)
    elif name == "I2CI2C":
        branches = []
        for b in _three_interps(g, 0, 2):
            x = g.conv_relu(b, 3, 8, 3)
            branches.append(g.conv_relu(x, 8, 4, 1))
        c = g.concat(branches)  # 12 channels
        c2 = g.concat(_three_interps(g, c, 2))  # 36 channels
        x = g.conv_relu(c2, 36, 9, 3)
        g.conv(x, 9, 3, 3)
    elif name in _BASELINE_KINDS:
        up = g.interp(0, _BASELINE_KINDS[name], 2)
        x = g.conv_relu(up, 3, 8, 5)
        x = g.conv_relu(x, 8, 4, 3)
        g.conv(x, 4, 3, 3)
    else:
        raise ValueError(f"unknown architecture {name!r}; expected one of {sorted(ARCH_SCALES)}")
    return g


def build_spec(name: str, scale: int, final_relu: bool = False) -> ArchitectureSpec:
    if name not in ARCH_SCALES:
        raise ValueError(f"unknown architecture {name!r}; expected one of {sorted(ARCH_SCALES)}")
    if scale != ARCH_SCALES[name]:
        raise ValueError(f"architecture {name} upscales by {ARCH_SCALES[name]}, not {scale}")
    g = _build_graph(name)
    nodes = list(g.nodes)
    if final_relu:
        nodes.append(Node("relu", (len(nodes),)))
    return ArchitectureSpec(
        name=name,
        scale=scale,
        nodes=tuple(nodes),
        layer_shapes=tuple(g.layer_shapes),
        final_relu=final_relu,
    )


def build(name: str, scale: int, seed: int, final_relu: bool = False) -> Model:
    """Construct a freshly initialized model, fully determined by `seed`."""
    spec = build_spec(name, scale, final_relu)
    children = np.random.SeedSequence(seed).spawn(len(spec.layer_shapes))
    layers = [
        nn.init_layer(in_ch, out_f, k, child)
        for (in_ch, out_f, k), child in zip(spec.layer_shapes, children)
    ]
    return Model(spec=spec, layers=layers, seed=seed)


def forward_values(model: Model, batch: np.ndarray) -> list:
    """Evaluate every node on a (N, H, W, C) stack; values[0] is the input."""
    values = [np.asarray(batch, dtype=np.float64)]
    for node in model.spec.nodes:
        ins = [values[i] for i in node.inputs]
        if node.op == "conv":
            out = nn.conv_forward_batch(model.layers[node.layer], ins[0])
        elif node.op == "relu":
            out = np.maximum(ins[0], 0.0)
        elif node.op == "interp":
            out = interp.resample_batch(ins[0], node.kind, node.factor)
        elif node.op == "concat":
            out = np.concatenate(ins, axis=3)
        else:
            raise ValueError(f"unknown node op {node.op!r}")
        values.append(out)
    return values


def forward_batch(model: Model, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4 or batch.shape[3] != 3:
        raise ShapeMismatchError(f"expected (N, H, W, 3) input, got {batch.shape}")
    return forward_values(model, batch)[-1]


def forward(model: Model, image) -> np.ndarray:
    """Super-resolve one (H, W, 3) tensor to (H*scale, W*scale, 3)."""
    image = as_tensor(image)
    if image.shape[2] != 3:
        raise ShapeMismatchError(f"expected a 3-channel input, got {image.shape[2]} channels")
    return forward_batch(model, image[np.newaxis])[0]


@dataclass
class ModelGrads:
    """Parameter gradients aligned with model.layers, plus the input gradient."""

    layers: list  # [(weight_grad, bias_grad), ...]
    input: np.ndarray


def _accumulate(grads: list, idx: int, g: np.ndarray) -> None:
    grads[idx] = g if grads[idx] is None else grads[idx] + g


def backward_batch(model: Model, batch: np.ndarray, upstream: np.ndarray,
                   values: list = None) -> ModelGrads:
    """Exact gradients of `forward_batch` w.r.t. all parameters and the input.

    `values` from a previous `forward_values` call may be passed to skip
    recomputing the forward pass.
    """
    batch = np.asarray(batch, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if values is None:
        values = forward_values(model, batch)
    if upstream.shape != values[-1].shape:
        raise ShapeMismatchError(
            f"upstream shape {upstream.shape} != output shape {values[-1].shape}"
        )
    grads = [None] * len(values)
    grads[-1] = upstream
    layer_grads = [
        (np.zeros_like(layer.weights), np.zeros_like(layer.biases)) for layer in model.layers
    ]
    for vi in range(len(values) - 1, 0, -1):
        g = grads[vi]
        if g is None:
            continue
        node = model.spec.nodes[vi - 1]
        if node.op == "conv":
            gin, gw, gb = nn.conv_backward_batch(
                model.layers[node.layer], values[node.inputs[0]], g
            )
            layer_grads[node.layer][0][...] += gw
            layer_grads[node.layer][1][...] += gb
            _accumulate(grads, node.inputs[0], gin)
        elif node.op == "relu":
            _accumulate(grads, node.inputs[0], np.where(values[node.inputs[0]] > 0.0, g, 0.0))
        elif node.op == "interp":
            src = values[node.inputs[0]]
            gin = interp.resample_backward_batch(g, node.kind, node.factor, src.shape[1], src.shape[2])
            _accumulate(grads, node.inputs[0], gin)
        elif node.op == "concat":
            offset = 0
            for i in node.inputs:
                c = values[i].shape[3]
                _accumulate(grads, i, g[:, :, :, offset : offset + c])
                offset += c
    input_grad = grads[0] if grads[0] is not None else np.zeros_like(batch)
    return ModelGrads(layers=layer_grads, input=input_grad)


def backward(model: Model, image, upstream) -> ModelGrads:
    image = as_tensor(image)
    upstream = as_tensor(upstream)
    grads = backward_batch(model, image[np.newaxis], upstream[np.newaxis])
    return ModelGrads(layers=grads.layers, input=grads.input[0])


def parameters(model: Model) -> list:
    """The trainable arrays in graph order: [w0, b0, w1, b1, ...]."""
    out = []
    for layer in model.layers:
        out.append(layer.weights)
        out.append(layer.biases)
    return out


def grads_as_list(grads: ModelGrads) -> list:
    out = []
    for gw, gb in grads.layers:
        out.append(gw)
        out.append(gb)
    return out


def parameter_count(model: Model) -> int:
    return sum(layer.parameter_count for layer in model.layers)


def parameter_vector(model: Model) -> np.ndarray:
    return np.concatenate([p.ravel() for p in parameters(model)])


def set_parameter_vector(model: Model, vec: np.ndarray) -> None:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.size != parameter_count(model):
        raise ShapeMismatchError(
            f"parameter vector has {vec.size} entries, model needs {parameter_count(model)}"
        )
    offset = 0
    for p in parameters(model):
        p[...] = vec[offset : offset + p.size].reshape(p.shape)
        offset += p.size


def conv_dims(model: Model, input_hw=(16, 16)) -> list:
    """Per-conv-layer (in_channels, kernel, filters, out_h, out_w) facts,
    obtained by propagating spatial dims through the graph."""
    dims = [tuple(input_hw)]
    out = [None] * len(model.layers)
    for node in model.spec.nodes:
        if node.op == "interp":
            h, w = dims[node.inputs[0]]
            s = node.factor
            dims.append((h * s, w * s))
        else:
            h, w = dims[node.inputs[0]]
            dims.append((h, w))
            if node.op == "conv":
                in_ch, out_f, k = model.spec.layer_shapes[node.layer]
                out[node.layer] = nn.LayerDims(in_ch, k, out_f, h, w)
    return out


def model_complexity(model: Model, input_hw=(16, 16)) -> nn.ComplexityReport:
    return nn.complexity(conv_dims(model, input_hw))


# ---------------------------------------------------------------------------
# Model file format: magic, version, text metadata, raw little-endian f64
# parameters in graph order, sha256 checksum.
# ---------------------------------------------------------------------------

_MAGIC = b"HSRM"
_VERSION = 1


def _meta_text(model: Model) -> str:
    layers = ";".join(f"{i},{o},{k}" for i, o, k in model.spec.layer_shapes)
    return (
        f"architecture: {model.spec.name}\n"
        f"scale: {model.spec.scale}\n"
        f"final_relu: {int(model.spec.final_relu)}\n"
        f"seed: {model.seed}\n"
        f"layers: {layers}\n"
    )


def save(model: Model, path) -> None:
    """Write the model file atomically (temp file + rename)."""
    meta = _meta_text(model).encode("utf-8")
    params = parameter_vector(model).astype("<f8").tobytes()
    body = (
        _MAGIC
        + struct.pack("<I", _VERSION)
        + struct.pack("<I", len(meta))
        + meta
        + struct.pack("<Q", parameter_count(model))
        + params
    )
    digest = hashlib.sha256(body).digest()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(body + digest)
    os.replace(tmp, path)


def _parse_meta(meta: bytes) -> dict:
    try:
        text = meta.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MetadataError(f"metadata is not valid utf-8: {exc}") from exc
    fields = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        if ": " not in line:
            raise MetadataError(f"malformed metadata line {line!r}")
        key, value = line.split(": ", 1)
        fields[key] = value
    return fields


def load(path) -> Model:
    """Read a model file, verifying magic, version, checksum and metadata."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(_MAGIC) + 4:
        raise TruncatedFileError(f"{path}: file too short to be a model file")
    if blob[:4] != _MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}")
    version = struct.unpack_from("<I", blob, 4)[0]
    if version != _VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported format version {version}")
    if len(blob) < 44:  # magic+version+metalen+digest minimum
        raise TruncatedFileError(f"{path}: truncated header")
    digest = blob[-32:]
    body = blob[:-32]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumMismatchError(f"{path}: checksum mismatch")
    meta_len = struct.unpack_from("<I", blob, 8)[0]
    offset = 12
    if len(body) < offset + meta_len + 8:
        raise TruncatedFileError(f"{path}: truncated metadata")
    fields = _parse_meta(body[offset : offset + meta_len])
    offset += meta_len
    declared = struct.unpack_from("<Q", body, offset)[0]
    offset += 8
    param_bytes = body[offset:]
    if len(param_bytes) != declared * 8:
        raise TruncatedFileError(
            f"{path}: expected {declared * 8} parameter bytes, found {len(param_bytes)}"
        )
    try:
        name = fields["architecture"]
        scale = int(fields["scale"])
        final_relu = bool(int(fields["final_relu"]))
        seed = int(fields["seed"])
        layers_text = fields["layers"]
    except (KeyError, ValueError) as exc:
        raise MetadataError(f"{path}: bad metadata field: {exc}") from exc
    try:
        spec = build_spec(name, scale, final_relu)
    except ValueError as exc:
        raise MetadataError(f"{path}: {exc}") from exc
    expected_layers = ";".join(f"{i},{o},{k}" for i, o, k in spec.layer_shapes)
    if layers_text != expected_layers:
        raise MetadataError(
            f"{path}: layer dims {layers_text!r} do not match architecture {name}"
        )
    expected_count = sum(o * (k * k * i + 1) for i, o, k in spec.layer_shapes)
    if declared != expected_count:
        raise MetadataError(
            f"{path}: parameter count {declared} does not match architecture "
            f"{name} ({expected_count})"
        )
    vec = np.frombuffer(param_bytes, dtype="<f8").astype(np.float64)
    layers = []
    pos = 0
    for in_ch, out_f, k in spec.layer_shapes:
        wsize = out_f * k * k * in_ch
        weights = vec[pos : pos + wsize].reshape(out_f, k, k, in_ch).copy()
        pos += wsize
        biases = vec[pos : pos + out_f].copy()
        pos += out_f
        layers.append(nn.ConvLayer(in_ch, out_f, k, weights, biases))
    return Model(spec=spec, layers=layers, seed=seed)
