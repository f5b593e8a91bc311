"""Model construction from declarative layer stacks, plus training utilities.

Models are built from ``LayerSpec`` lists validated at build time: every
consecutive pair of layers must compose shape-wise, and building the same
config twice with the same seed yields bit-identical parameters.

The default generator and critic reproduce the 48-band spectral stacks:

    generator: dense 384 -> reshape (64, 6) -> convT to (32, 12)
               -> convT to (16, 24) -> convT to (1, 48), sigmoid head
    critic:    conv to (16, 24) -> (32, 12) -> (64, 6) -> flatten 384
               -> dense 1, no output nonlinearity

Shapes here are per-sample (channels, length); batches stack on a leading
axis.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from advspec import ndtensor as nd
from advspec.ndtensor import Tensor

__all__ = [
    "BuildError",
    "LayerSpec",
    "ModelConfig",
    "Model",
    "build_model",
    "build_generator",
    "build_critic",
    "build_classifier",
    "default_generator_config",
    "default_critic_config",
    "default_classifier_config",
    "dense_generator_config",
    "dense_critic_config",
    "linear_classifier_config",
    "AdamParams",
    "AdamState",
    "adam_step",
    "zero_grad",
    "cross_entropy",
    "train_classifier",
    "evaluate_classifier",
    "cohen_kappa",
    "save_model",
    "load_model",
    "save_arrays",
    "load_arrays",
]

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid", "softmax", "none")

MAGIC = b"ADVS"
FORMAT_VERSION = 1


class BuildError(ValueError):
    """A layer stack fails to compose or a config field is invalid."""


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a model stack.

    kind: dense | reshape | conv1d | conv1d_transpose | activation | maxpool
    """

    kind: str
    units: Optional[int] = None  # dense
    shape: Optional[tuple] = None  # reshape target, per sample
    channels: Optional[int] = None  # conv out channels
    kernel: Optional[int] = None
    stride: int = 1
    pad: int = 0
    out_pad: int = 0
    width: Optional[int] = None  # maxpool window (non-overlapping)
    activation: Optional[str] = None  # for kind == "activation"

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for key in ("units", "channels", "kernel", "width", "activation"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        if self.shape is not None:
            d["shape"] = list(self.shape)
        for key in ("stride", "pad", "out_pad"):
            v = getattr(self, key)
            if (key == "stride" and v != 1) or (key != "stride" and v != 0):
                d[key] = v
        return d

    @staticmethod
    def from_dict(d: dict) -> "LayerSpec":
        d = dict(d)
        if "shape" in d:
            d["shape"] = tuple(d["shape"])
        return LayerSpec(**d)


def dense(units: int) -> LayerSpec:
    return LayerSpec("dense", units=units)


def reshape_to(*shape: int) -> LayerSpec:
    return LayerSpec("reshape", shape=tuple(shape))


def conv(channels: int, kernel: int, stride: int = 1, pad: int = 0) -> LayerSpec:
    return LayerSpec("conv1d", channels=channels, kernel=kernel, stride=stride, pad=pad)


def conv_transpose(channels: int, kernel: int, stride: int = 1, pad: int = 0, out_pad: int = 0) -> LayerSpec:
    return LayerSpec(
        "conv1d_transpose", channels=channels, kernel=kernel, stride=stride, pad=pad, out_pad=out_pad
    )


def act(name: str) -> LayerSpec:
    return LayerSpec("activation", activation=name)


def maxpool(width: int) -> LayerSpec:
    return LayerSpec("maxpool", width=width)


@dataclass
class ModelConfig:
    """Layer stack plus everything needed to rebuild it bit-identically."""

    layers: list
    input_shape: tuple
    seed: int = 0
    init: str = "he_uniform"
    zero_init_last_dense: bool = False

    def to_dict(self) -> dict:
        return {
            "layers": [s.to_dict() for s in self.layers],
            "input_shape": list(self.input_shape),
            "seed": int(self.seed),
            "init": self.init,
            "zero_init_last_dense": bool(self.zero_init_last_dense),
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(
            layers=[LayerSpec.from_dict(s) for s in d["layers"]],
            input_shape=tuple(d["input_shape"]),
            seed=int(d.get("seed", 0)),
            init=d.get("init", "he_uniform"),
            zero_init_last_dense=bool(d.get("zero_init_last_dense", False)),
        )


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


class _Layer:
    params: list  # list[Tensor]

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError


class _Dense(_Layer):
    def __init__(self, w: Tensor, b: Tensor):
        self.w = w
        self.b = b
        self.params = [w, b]

    def forward(self, x: Tensor) -> Tensor:
        out = nd.matmul(x, self.w)
        return nd.add(out, nd.broadcast_to(nd.reshape(self.b, (1, self.b.size)), out.shape))


class _Reshape(_Layer):
    def __init__(self, target: tuple):
        self.target = target
        self.params = []

    def forward(self, x: Tensor) -> Tensor:
        return nd.reshape(x, (x.shape[0],) + self.target)


class _Conv(_Layer):
    def __init__(self, k: Tensor, b: Tensor, stride: int, pad: int):
        self.k = k
        self.b = b
        self.stride = stride
        self.pad = pad
        self.params = [k, b]

    def forward(self, x: Tensor) -> Tensor:
        out = nd.conv1d(x, self.k, stride=self.stride, pad=self.pad)
        bias = nd.reshape(self.b, (1, self.b.size, 1))
        return nd.add(out, nd.broadcast_to(bias, out.shape))


class _ConvTranspose(_Layer):
    def __init__(self, k: Tensor, b: Tensor, stride: int, pad: int, out_pad: int):
        self.k = k
        self.b = b
        self.stride = stride
        self.pad = pad
        self.out_pad = out_pad
        self.params = [k, b]

    def forward(self, x: Tensor) -> Tensor:
        out = nd.conv1d_transpose(x, self.k, stride=self.stride, pad=self.pad, out_pad=self.out_pad)
        bias = nd.reshape(self.b, (1, self.b.size, 1))
        return nd.add(out, nd.broadcast_to(bias, out.shape))


class _Activation(_Layer):
    def __init__(self, name: str):
        self.name = name
        self.params = []

    def forward(self, x: Tensor) -> Tensor:
        if self.name == "relu":
            return nd.relu(x)
        if self.name == "leaky_relu":
            return nd.leaky_relu(x, 0.2)
        if self.name == "tanh":
            return nd.tanh(x)
        if self.name == "sigmoid":
            return nd.sigmoid(x)
        if self.name == "softmax":
            return _softmax_rows(x)
        return x  # "none"


class _MaxPool(_Layer):
    def __init__(self, width: int):
        self.width = width
        self.params = []

    def forward(self, x: Tensor) -> Tensor:
        b, c, length = x.shape
        keep = (length // self.width) * self.width
        if keep == 0:
            raise BuildError(f"maxpool width {self.width} exceeds length {length}")
        if keep != length:
            x = nd.slice_axis(x, 2, 0, keep)
        windows = nd.reshape(x, (b, c, keep // self.width, self.width))
        return nd.max_last(windows)


def _softmax_rows(x: Tensor) -> Tensor:
    # rowwise softmax on (B, K); the shift is a detached constant, which
    # leaves both value and gradient unchanged (shift invariance)
    shift = Tensor(x.data.max(axis=1, keepdims=True))
    e = nd.exp(nd.sub(x, nd.broadcast_to(shift, x.shape)))
    denom = nd.sum(e, axis=1, keepdims=True)
    return nd.mul(e, nd.broadcast_to(nd.pow_const(denom, -1.0), e.shape))


# ---------------------------------------------------------------------------
# shape propagation and building
# ---------------------------------------------------------------------------


def _propagate(spec: LayerSpec, shape: tuple, index: int) -> tuple:
    """Per-sample output shape of one layer; raises BuildError naming the pair."""

    def fail(reason: str):
        raise BuildError(f"layer {index} ({spec.kind}) after shape {shape}: {reason}")

    if spec.kind == "dense":
        if len(shape) != 1:
            fail("dense needs a flat (features,) input; insert a reshape")
        return (spec.units,)
    if spec.kind == "reshape":
        if int(np.prod(shape)) != int(np.prod(spec.shape)):
            fail(f"cannot reshape to {spec.shape} (size mismatch)")
        return tuple(spec.shape)
    if spec.kind == "conv1d":
        if len(shape) != 2:
            fail("conv1d needs (channels, length) input")
        c, length = shape
        lp = length + 2 * spec.pad
        if spec.kernel > lp:
            fail(f"kernel {spec.kernel} larger than padded length {lp}")
        return (spec.channels, (lp - spec.kernel) // spec.stride + 1)
    if spec.kind == "conv1d_transpose":
        if len(shape) != 2:
            fail("conv1d_transpose needs (channels, length) input")
        c, length = shape
        out_len = (length - 1) * spec.stride - 2 * spec.pad + spec.kernel + spec.out_pad
        if out_len < 1:
            fail(f"computed output length {out_len} < 1")
        return (spec.channels, out_len)
    if spec.kind == "maxpool":
        if len(shape) != 2:
            fail("maxpool needs (channels, length) input")
        c, length = shape
        if length < spec.width:
            fail(f"pool width {spec.width} exceeds length {length}")
        return (c, length // spec.width)
    if spec.kind == "activation":
        if spec.activation not in ACTIVATIONS:
            fail(f"unknown activation {spec.activation!r}")
        if spec.activation == "softmax" and len(shape) != 1:
            fail("softmax head needs a flat (classes,) input")
        return shape
    fail(f"unknown layer kind {spec.kind!r}")


class Model:
    """An ordered layer stack with parameters; input/output per-sample shapes known."""

    def __init__(self, cfg: ModelConfig, layers: list, shapes: list):
        self.cfg = cfg
        self.layers = layers
        self.shapes = shapes  # per-sample shape before layer i; shapes[-1] is the output

    @property
    def input_shape(self) -> tuple:
        return self.shapes[0]

    @property
    def output_shape(self) -> tuple:
        return self.shapes[-1]

    def parameters(self) -> list:
        out = []
        for layer in self.layers:
            out.extend(layer.params)
        return out

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[1:] != self.input_shape:
            raise BuildError(f"input shape {x.shape[1:]} != expected {self.input_shape}")
        for layer in self.layers:
            x = layer.forward(x)
        return x

    __call__ = forward

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Plain-array forward pass with no gradient recording."""
        arr = np.asarray(x, dtype=np.float64)
        squeeze = arr.shape == self.input_shape
        if squeeze:
            arr = arr[None]
        if arr.shape[1:] != self.input_shape and arr.ndim == 2 and self.input_shape != (arr.shape[1],):
            arr = arr.reshape((arr.shape[0],) + self.input_shape)
        with nd.no_grad():
            out = self.forward(Tensor(arr)).data
        return out[0] if squeeze else out


def _he_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def build_model(cfg: ModelConfig) -> Model:
    """Validate the stack, draw parameters (seeded), return a Model."""
    if cfg.init != "he_uniform":
        raise BuildError(f"unknown init scheme {cfg.init!r}")
    rng = np.random.default_rng(cfg.seed)
    shape = tuple(cfg.input_shape)
    shapes = [shape]
    layers = []
    last_dense_index = max(
        (i for i, s in enumerate(cfg.layers) if s.kind == "dense"), default=-1
    )
    for i, spec in enumerate(cfg.layers):
        out_shape = _propagate(spec, shape, i)
        if spec.kind == "dense":
            fan_in = shape[0]
            w = _he_uniform(rng, (fan_in, spec.units), fan_in)
            b = np.zeros(spec.units)
            if cfg.zero_init_last_dense and i == last_dense_index:
                w = np.zeros_like(w)
            layers.append(_Dense(Tensor(w, requires_grad=True), Tensor(b, requires_grad=True)))
        elif spec.kind == "conv1d":
            c_in = shape[0]
            fan_in = c_in * spec.kernel
            k = _he_uniform(rng, (spec.channels, c_in, spec.kernel), fan_in)
            b = np.zeros(spec.channels)
            layers.append(
                _Conv(Tensor(k, requires_grad=True), Tensor(b, requires_grad=True), spec.stride, spec.pad)
            )
        elif spec.kind == "conv1d_transpose":
            c_in = shape[0]
            fan_in = c_in * spec.kernel
            k = _he_uniform(rng, (c_in, spec.channels, spec.kernel), fan_in)
            b = np.zeros(spec.channels)
            layers.append(
                _ConvTranspose(
                    Tensor(k, requires_grad=True),
                    Tensor(b, requires_grad=True),
                    spec.stride,
                    spec.pad,
                    spec.out_pad,
                )
            )
        elif spec.kind == "reshape":
            layers.append(_Reshape(tuple(spec.shape)))
        elif spec.kind == "activation":
            layers.append(_Activation(spec.activation))
        elif spec.kind == "maxpool":
            layers.append(_MaxPool(spec.width))
        shape = out_shape
        shapes.append(shape)
    return Model(cfg, layers, shapes)


# ---------------------------------------------------------------------------
# default configs
# ---------------------------------------------------------------------------


def default_generator_config(latent_dim: int = 64, bands: int = 48, seed: int = 0) -> ModelConfig:
    """Spectral generator: latent -> (1, bands) in [0, 1], lengths doubling per stage."""
    if bands % 8 != 0:
        raise BuildError(f"bands must be divisible by 8 for the doubling stack, got {bands}")
    l0 = bands // 8
    return ModelConfig(
        layers=[
            dense(64 * l0),
            act("relu"),
            reshape_to(64, l0),
            conv_transpose(32, 3, stride=2, pad=1, out_pad=1),
            act("relu"),
            conv_transpose(16, 3, stride=2, pad=1, out_pad=1),
            act("relu"),
            conv_transpose(1, 5, stride=2, pad=2, out_pad=1),
            act("sigmoid"),
        ],
        input_shape=(latent_dim,),
        seed=seed,
    )


def default_critic_config(bands: int = 48, seed: int = 1) -> ModelConfig:
    """Spectral critic mirroring the generator; real-valued scalar output."""
    if bands % 8 != 0:
        raise BuildError(f"bands must be divisible by 8 for the halving stack, got {bands}")
    return ModelConfig(
        layers=[
            conv(16, 5, stride=2, pad=2),
            act("leaky_relu"),
            conv(32, 3, stride=2, pad=1),
            act("leaky_relu"),
            conv(64, 3, stride=2, pad=1),
            act("leaky_relu"),
            reshape_to(64 * (bands // 8)),
            dense(1),
        ],
        input_shape=(1, bands),
        seed=seed,
    )


def default_classifier_config(bands: int = 48, n_classes: int = 3, seed: int = 2) -> ModelConfig:
    """1-D CNN pixel classifier: conv(20, k=11) -> maxpool(3) -> dense(100) -> softmax."""
    pooled = bands // 3
    return ModelConfig(
        layers=[
            conv(20, 11, stride=1, pad=5),
            act("tanh"),
            maxpool(3),
            reshape_to(20 * pooled),
            dense(100),
            act("tanh"),
            dense(n_classes),
            act("softmax"),
        ],
        input_shape=(1, bands),
        seed=seed,
        zero_init_last_dense=True,
    )


def dense_generator_config(latent_dim: int, out_dim: int, hidden: Sequence[int] = (64, 64), seed: int = 0) -> ModelConfig:
    """Dense-only generator for low-dimensional (toy) data; sigmoid head."""
    layers = []
    for h in hidden:
        layers += [dense(h), act("relu")]
    layers += [dense(out_dim), act("sigmoid")]
    return ModelConfig(layers=layers, input_shape=(latent_dim,), seed=seed)


def dense_critic_config(in_dim: int, hidden: Sequence[int] = (64, 64), seed: int = 1) -> ModelConfig:
    """Dense-only critic for low-dimensional (toy) data."""
    layers = []
    for h in hidden:
        layers += [dense(h), act("leaky_relu")]
    layers += [dense(1)]
    return ModelConfig(layers=layers, input_shape=(in_dim,), seed=seed)


def linear_classifier_config(n_features: int, n_classes: int, seed: int = 2) -> ModelConfig:
    """Softmax regression; its decision boundary is a hyperplane."""
    return ModelConfig(
        layers=[dense(n_classes), act("softmax")],
        input_shape=(n_features,),
        seed=seed,
        zero_init_last_dense=True,
    )


def build_generator(cfg: Optional[ModelConfig] = None) -> Model:
    model = build_model(cfg or default_generator_config())
    return model


def build_critic(cfg: Optional[ModelConfig] = None) -> Model:
    cfg = cfg or default_critic_config()
    if cfg.layers and cfg.layers[-1].kind == "activation" and cfg.layers[-1].activation != "none":
        raise BuildError("critic must end with a linear layer (real-valued output, no nonlinearity)")
    model = build_model(cfg)
    if int(np.prod(model.output_shape)) != 1:
        raise BuildError(f"critic must output one scalar per sample, got {model.output_shape}")
    return model


def build_classifier(cfg: ModelConfig) -> Model:
    if not cfg.layers or cfg.layers[-1].kind != "activation" or cfg.layers[-1].activation != "softmax":
        raise BuildError("classifier must end with a softmax head")
    return build_model(cfg)


# ---------------------------------------------------------------------------
# optimizer and loss
# ---------------------------------------------------------------------------


@dataclass
class AdamParams:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def to_dict(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}

    @staticmethod
    def from_dict(d: dict) -> "AdamParams":
        return AdamParams(**d)


class AdamState:
    """First/second moment arrays shaped like the parameters, plus the step count."""

    def __init__(self, params: Sequence[Tensor], hyper: AdamParams):
        self.hyper = hyper
        self.step = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, in place on ``params``."""
    if len(params) != len(state.m):
        raise ValueError(f"expected {len(state.m)} parameters, got {len(params)}")
    h = state.hyper
    state.step += 1
    t = state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
        state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g
        state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g
        m_hat = state.m[i] / (1.0 - h.beta1**t)
        v_hat = state.v[i] / (1.0 - h.beta2**t)
        p.data = p.data - h.lr * m_hat / (np.sqrt(v_hat) + h.eps)


def zero_grad(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = None


def cross_entropy(probs: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood; the log input is clamped at 1e-12."""
    labels = np.asarray(labels)
    n, k = probs.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} != ({n},)")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"label out of range [0, {k})")
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    picked = nd.sum(nd.mul(probs, Tensor(onehot)), axis=1)
    return nd.neg(nd.mean(nd.log(nd.maximum_const(picked, 1e-12))))


def train_classifier(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    epochs: int = 30,
    batch_size: int = 64,
    hyper: Optional[AdamParams] = None,
    seed: int = 0,
) -> list:
    """Minibatch Adam on cross-entropy; returns per-epoch mean losses."""
    hyper = hyper or AdamParams(lr=1e-3, beta1=0.9, beta2=0.999)
    params = model.parameters()
    state = AdamState(params, hyper)
    rng = np.random.default_rng(seed)
    n = x.shape[0]
    x = np.asarray(x, dtype=np.float64).reshape((n,) + model.input_shape)
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            probs = model.forward(Tensor(x[idx]))
            loss = cross_entropy(probs, y[idx])
            zero_grad(params)
            loss.backward()
            adam_step(params, [p.grad for p in params], state)
            epoch_losses.append(loss.item())
        losses.append(float(np.mean(epoch_losses)))
    zero_grad(params)
    return losses


def evaluate_classifier(model: Model, x: np.ndarray, y: np.ndarray) -> dict:
    """Overall accuracy, per-class accuracy and Cohen's kappa."""
    probs = model.predict(x)
    pred = probs.argmax(axis=1)
    y = np.asarray(y)
    k = probs.shape[1]
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    per_class = {}
    for c in range(k):
        total = int((y == c).sum())
        per_class[str(c)] = float((pred[y == c] == c).sum() / total) if total else float("nan")
    return {
        "overall_accuracy": float((pred == y).mean()),
        "per_class_accuracy": per_class,
        "kappa": cohen_kappa(confusion),
        "confusion": confusion.tolist(),
    }


def cohen_kappa(confusion: np.ndarray) -> float:
    """Chance-corrected agreement from a confusion matrix (rows true, cols predicted)."""
    confusion = np.asarray(confusion, dtype=np.float64)
    n = confusion.sum()
    if n == 0:
        return float("nan")
    po = np.trace(confusion) / n
    pe = float((confusion.sum(axis=1) * confusion.sum(axis=0)).sum()) / (n * n)
    if pe >= 1.0:
        return 1.0 if po >= 1.0 else 0.0
    return float((po - pe) / (1.0 - pe))


# ---------------------------------------------------------------------------
# serialization: ADVS binary bundle + JSON config sidecar
# ---------------------------------------------------------------------------


def save_arrays(path, groups: Sequence[Sequence[np.ndarray]]) -> None:
    """Write grouped float64 arrays: header (magic, version, group count),
    per-group shape lists, then raw little-endian data in order."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(groups)))
        for group in groups:
            f.write(struct.pack("<I", len(group)))
            for arr in group:
                f.write(struct.pack("<I", arr.ndim))
                f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        for group in groups:
            for arr in group:
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_arrays(path) -> list:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        version, n_groups = struct.unpack("<II", f.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        shapes = []
        for _ in range(n_groups):
            (n_arrays,) = struct.unpack("<I", f.read(4))
            group = []
            for _ in range(n_arrays):
                (ndim,) = struct.unpack("<I", f.read(4))
                group.append(struct.unpack(f"<{ndim}I", f.read(4 * ndim)))
            shapes.append(group)
        groups = []
        for group in shapes:
            arrays = []
            for shape in group:
                count = int(np.prod(shape)) if shape else 1
                buf = f.read(8 * count)
                arrays.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
            groups.append(arrays)
    return groups


def save_model(model: Model, path) -> None:
    """Binary parameter bundle at ``path`` plus a JSON config sidecar."""
    path = Path(path)
    groups = [[p.data for p in layer.params] for layer in model.layers]
    save_arrays(path, groups)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(model.cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def load_model(path) -> Model:
    path = Path(path)
    sidecar = path.with_suffix(".json")
    if not sidecar.exists():
        raise FileNotFoundError(f"missing config sidecar {sidecar}")
    cfg = ModelConfig.from_dict(json.loads(sidecar.read_text()))
    model = build_model(cfg)
    groups = load_arrays(path)
    if len(groups) != len(model.layers):
        raise ValueError(f"{path}: {len(groups)} layer groups != {len(model.layers)} layers")
    for layer, group in zip(model.layers, groups):
        if len(layer.params) != len(group):
            raise ValueError(f"{path}: parameter count mismatch in layer {type(layer).__name__}")
        for p, arr in zip(layer.params, group):
            if p.data.shape != arr.shape:
                raise ValueError(f"{path}: shape {arr.shape} != expected {p.data.shape}")
            p.data = arr
    return model
