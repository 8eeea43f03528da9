"""Layer stacks, parameter bookkeeping and the VCNN model file format."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import functional as F


class LayerKind(enum.IntEnum):
    CONV2D = 1
    MAXPOOL2D = 2
    RELU = 3
    FLATTEN = 4
    DENSE = 5


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 0
    in_features: int = 0
    out_features: int = 0

    @classmethod
    def conv(cls, in_channels, out_channels, kernel=3):
        return cls(LayerKind.CONV2D, in_channels=in_channels, out_channels=out_channels, kernel=kernel)

    @classmethod
    def dense(cls, in_features, out_features):
        return cls(LayerKind.DENSE, in_features=in_features, out_features=out_features)

    @property
    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        if self.kind is LayerKind.CONV2D:
            return {
                "weight": (self.out_channels, self.in_channels, self.kernel, self.kernel),
                "bias": (self.out_channels,),
            }
        if self.kind is LayerKind.DENSE:
            return {"weight": (self.in_features, self.out_features), "bias": (self.out_features,)}
        return {}

    @property
    def param_count(self) -> int:
        return sum(int(np.prod(s)) for s in self.param_shapes.values())

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        """Shape of one sample after this layer; raises if incompatible."""
        k = self.kind
        if k is LayerKind.CONV2D:
            if len(shape) != 3 or shape[0] != self.in_channels:
                raise ValueError(f"conv expects ({self.in_channels}, H, W), got {shape}")
            h, w = shape[1] - self.kernel + 1, shape[2] - self.kernel + 1
            if h < 1 or w < 1:
                raise ValueError(f"{shape[1]}x{shape[2]} map too small for a {self.kernel}x{self.kernel} kernel")
            return (self.out_channels, h, w)
        if k is LayerKind.MAXPOOL2D:
            if len(shape) != 3 or shape[1] < 2 or shape[2] < 2:
                raise ValueError(f"cannot pool shape {shape}")
            return (shape[0], shape[1] // 2, shape[2] // 2)
        if k is LayerKind.RELU:
            return shape
        if k is LayerKind.FLATTEN:
            return (int(np.prod(shape)),)
        if len(shape) != 1 or shape[0] != self.in_features:
            raise ValueError(f"dense expects ({self.in_features},), got {shape}")
        return (self.out_features,)


@dataclass(frozen=True)
class ArchConfig:
    """Widths of the default three-conv-block classifier."""

    conv_channels: tuple[int, ...] = (8, 16, 32)
    kernel: int = 3
    hidden: tuple[int, ...] = (128,)


@dataclass
class CnnModel:
    specs: list[LayerSpec]
    params: list[dict[str, np.ndarray]]
    num_classes: int
    input_shape: tuple[int, int, int]
    shapes: list[tuple[int, ...]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        shape = self.input_shape
        shapes = [shape]
        for spec, p in zip(self.specs, self.params, strict=True):
            for name, want in spec.param_shapes.items():
                if name not in p or p[name].shape != want:
                    raise ValueError(f"parameter {name} of {spec.kind.name} must have shape {want}")
            shape = spec.output_shape(shape)
            shapes.append(shape)
        if shape != (self.num_classes,):
            raise ValueError(f"network output {shape} does not match {self.num_classes} classes")
        self.shapes = shapes

    @property
    def param_count(self) -> int:
        return sum(s.param_count for s in self.specs)

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list in layer order, weight before bias."""
        return [p[name] for spec, p in zip(self.specs, self.params) for name in spec.param_shapes]

    def with_parameters(self, flat) -> "CnnModel":
        flat = list(flat)
        params = []
        i = 0
        for spec in self.specs:
            d = {}
            for name in spec.param_shapes:
                d[name] = flat[i]
                i += 1
            params.append(d)
        if i != len(flat):
            raise ValueError("parameter list length does not match the model")
        return CnnModel(list(self.specs), params, self.num_classes, self.input_shape)

    def astype(self, dtype) -> "CnnModel":
        return self.with_parameters([p.astype(dtype) for p in self.parameters()])

    def summary(self) -> str:
        lines = [f"input {self.input_shape}"]
        for spec, out in zip(self.specs, self.shapes[1:]):
            lines.append(f"{spec.kind.name.lower():<10} -> {out}  params={spec.param_count}")
        lines.append(f"total trainable parameters: {self.param_count}")
        return "\n".join(lines)


def default_specs(input_shape, num_classes, arch: ArchConfig = ArchConfig()) -> list[LayerSpec]:
    specs = []
    shape = tuple(input_shape)
    c = shape[0]
    for width in arch.conv_channels:
        specs += [LayerSpec.conv(c, width, arch.kernel), LayerSpec(LayerKind.RELU), LayerSpec(LayerKind.MAXPOOL2D)]
        c = width
    specs.append(LayerSpec(LayerKind.FLATTEN))
    for s in specs:
        shape = s.output_shape(shape)
    features = shape[0]
    for h in arch.hidden:
        specs += [LayerSpec.dense(features, h), LayerSpec(LayerKind.RELU)]
        features = h
    specs.append(LayerSpec.dense(features, num_classes))
    return specs


def init_params(specs, seed: int = 0, dtype=np.float32) -> list[dict[str, np.ndarray]]:
    """He-style uniform init, ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``, zero biases."""
    rng = np.random.default_rng(seed)
    params = []
    for spec in specs:
        shapes = spec.param_shapes
        if not shapes:
            params.append({})
            continue
        w_shape = shapes["weight"]
        fan_in = int(np.prod(w_shape[1:])) if spec.kind is LayerKind.CONV2D else w_shape[0]
        bound = np.sqrt(6.0 / fan_in)
        params.append(
            {
                "weight": rng.uniform(-bound, bound, w_shape).astype(dtype),
                "bias": np.zeros(shapes["bias"], dtype=dtype),
            }
        )
    return params


def build_model(input_shape, num_classes: int, arch: ArchConfig = ArchConfig(), seed: int = 0, specs=None) -> CnnModel:
    if specs is None:
        specs = default_specs(input_shape, num_classes, arch)
    return CnnModel(list(specs), init_params(specs, seed), num_classes, tuple(input_shape))


# -- forward / backward ---------------------------------------------------


def forward(model: CnnModel, x: np.ndarray, keep: bool = False):
    """Run the stack on a batch ``(N, C, H, W)``; returns logits (and caches if ``keep``)."""
    if x.ndim != 4 or tuple(x.shape[1:]) != model.input_shape:
        raise ValueError(f"input batch {x.shape} does not match model input {model.input_shape}")
    caches = []
    for spec, p in zip(model.specs, model.params):
        k = spec.kind
        cache = None
        if k is LayerKind.CONV2D:
            cols = F.im2col(x, spec.kernel)
            out = F.conv2d_forward(x, p["weight"], p["bias"], cols=cols)
            cache = (x, cols)
        elif k is LayerKind.MAXPOOL2D:
            if keep:
                out, arg = F.maxpool2d_forward(x)
                cache = (x.shape, arg)
            else:
                out = F.maxpool2d_forward(x, return_argmax=False)
        elif k is LayerKind.RELU:
            out = F.relu_forward(x)
            cache = x
        elif k is LayerKind.FLATTEN:
            out = x.reshape(x.shape[0], -1)
            cache = x.shape
        else:
            out = F.dense_forward(x, p["weight"], p["bias"])
            cache = x
        if keep:
            caches.append(cache)
        x = out
    return (x, caches) if keep else x


def backward(model: CnnModel, caches, dlogits):
    """Backpropagate ``dlogits``; returns ``(dx, grads)`` with grads in ``parameters()`` order."""
    grads_rev = []
    d = dlogits
    for spec, p, cache in zip(reversed(model.specs), reversed(model.params), reversed(caches)):
        k = spec.kind
        if k is LayerKind.CONV2D:
            x, cols = cache
            d, dw, db = F.conv2d_backward(d, x, p["weight"], cols=cols)
            grads_rev += [db, dw]
        elif k is LayerKind.MAXPOOL2D:
            shape, arg = cache
            d = F.maxpool2d_backward(d, arg, shape)
        elif k is LayerKind.RELU:
            d = F.relu_backward(d, cache)
        elif k is LayerKind.FLATTEN:
            d = d.reshape(cache)
        else:
            d, dw, db = F.dense_backward(d, cache, p["weight"])
            grads_rev += [db, dw]
    return d, grads_rev[::-1]


# -- serialization ----------------------------------------------------------

MODEL_MAGIC = b"VCNN"
MODEL_VERSION = 1
_HEAD = struct.Struct("<4sIIIIII")  # magic, version, classes, C, H, W, n_layers
_LAYER = struct.Struct("<IIII")


class ModelFormatError(ValueError):
    pass


def _layer_fields(spec: LayerSpec):
    if spec.kind is LayerKind.CONV2D:
        return spec.in_channels, spec.out_channels, spec.kernel
    if spec.kind is LayerKind.DENSE:
        return spec.in_features, spec.out_features, 0
    return 0, 0, 0


def model_to_bytes(model: CnnModel) -> bytes:
    """VCNN: header, one 16-byte record per layer, then little-endian f32 parameters."""
    c, h, w = model.input_shape
    out = [_HEAD.pack(MODEL_MAGIC, MODEL_VERSION, model.num_classes, c, h, w, len(model.specs))]
    for spec in model.specs:
        out.append(_LAYER.pack(int(spec.kind), *_layer_fields(spec)))
    for arr in model.parameters():
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(out)


def model_from_bytes(buf: bytes) -> CnnModel:
    if len(buf) < _HEAD.size:
        raise ModelFormatError("corrupt model: truncated header")
    magic, version, classes, c, h, w, n_layers = _HEAD.unpack_from(buf)
    if magic != MODEL_MAGIC:
        raise ModelFormatError("not a VCNN model file")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    pos = _HEAD.size
    specs = []
    for _ in range(n_layers):
        if pos + _LAYER.size > len(buf):
            raise ModelFormatError("corrupt model: truncated layer table")
        code, a, b, k = _LAYER.unpack_from(buf, pos)
        pos += _LAYER.size
        try:
            kind = LayerKind(code)
        except ValueError:
            raise ModelFormatError(f"corrupt model: unknown layer kind {code}") from None
        if kind is LayerKind.CONV2D:
            specs.append(LayerSpec.conv(a, b, k))
        elif kind is LayerKind.DENSE:
            specs.append(LayerSpec.dense(a, b))
        else:
            specs.append(LayerSpec(kind))
    params = []
    for spec in specs:
        d = {}
        for name, shape in spec.param_shapes.items():
            nbytes = 4 * int(np.prod(shape))
            if pos + nbytes > len(buf):
                raise ModelFormatError("corrupt model: truncated parameters")
            d[name] = np.frombuffer(buf, dtype="<f4", count=nbytes // 4, offset=pos).astype(np.float32).reshape(shape)
            pos += nbytes
        params.append(d)
    if pos != len(buf):
        raise ModelFormatError("corrupt model: trailing bytes")
    try:
        return CnnModel(specs, params, classes, (c, h, w))
    except ValueError as exc:
        raise ModelFormatError(f"corrupt model: {exc}") from None


def save_model(model: CnnModel, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path) -> CnnModel:
    return model_from_bytes(Path(path).read_bytes())
