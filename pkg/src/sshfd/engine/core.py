"""Dense-MLP compute engine with reverse-mode gradients.

Supports exactly the layer vocabulary the pose networks need: linear,
batch normalization, ReLU, inverted dropout, and identity residual spans
over a sequential stack. Arrays are float32 for training/inference; a
float64 clone of a model is used for gradient checking.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ParameterError, ShapeError, StateError

LAYER_KINDS = ("linear", "batchnorm", "relu", "dropout", "residual-begin", "residual-end")


class Tensor:
    """Dense array with an optional gradient slot of identical shape."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray, grad: np.ndarray | None = None):
        self.value = np.asarray(value)
        if grad is not None and grad.shape != self.value.shape:
            raise ShapeError("grad shape must match value shape")
        self.grad = grad

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int = 0
    out_dim: int = 0
    dropout_p: float = 0.0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ParameterError(f"unknown layer kind {self.kind!r}")
        if self.kind == "linear" and (self.in_dim <= 0 or self.out_dim <= 0):
            raise ParameterError("linear layer needs positive in_dim/out_dim")
        if self.kind == "dropout" and not 0.0 <= self.dropout_p < 1.0:
            raise ParameterError("dropout_p must be in [0, 1)")


class Linear:
    def __init__(self, spec: LayerSpec, rng: np.random.Generator, dtype, init_std=0.01):
        self.spec = spec
        w = rng.normal(0.0, init_std, size=(spec.in_dim, spec.out_dim))
        self.W = Tensor(w.astype(dtype))
        self.b = Tensor(np.zeros(spec.out_dim, dtype=dtype))
        self._x = None

    def forward(self, x, train, rng):
        if x.shape[1] != self.spec.in_dim:
            raise ShapeError(
                f"linear layer expects width {self.spec.in_dim}, got {x.shape[1]}"
            )
        self._x = x
        return x @ self.W.value + self.b.value

    def backward(self, dy):
        self.W.grad += self._x.T @ dy
        self.b.grad += dy.sum(axis=0)
        return dy @ self.W.value.T

    def params(self):
        return [("W", self.W), ("b", self.b)]

    def buffers(self):
        return []


class BatchNorm:
    """Per-feature batch normalization with affine rescale and running stats."""

    eps = 1e-5
    momentum = 0.1

    def __init__(self, spec: LayerSpec, rng, dtype):
        self.spec = spec
        d = spec.in_dim
        self.gamma = Tensor(np.ones(d, dtype=dtype))
        self.beta = Tensor(np.zeros(d, dtype=dtype))
        self.running_mean = np.zeros(d, dtype=dtype)
        self.running_var = np.ones(d, dtype=dtype)
        self._cache = None

    def forward(self, x, train, rng):
        if train:
            mu = x.mean(axis=0)
            var = x.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mu) * inv_std
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mu
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
            self._cache = (xhat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (x - self.running_mean) * inv_std
            self._cache = None
        return xhat * self.gamma.value + self.beta.value

    def backward(self, dy):
        if self._cache is None:
            raise StateError("batchnorm backward requires a train-mode forward")
        xhat, inv_std = self._cache
        n = dy.shape[0]
        self.gamma.grad += (dy * xhat).sum(axis=0)
        self.beta.grad += dy.sum(axis=0)
        dxhat = dy * self.gamma.value
        return (
            inv_std
            / n
            * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        )

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def buffers(self):
        return [("running_mean", self), ("running_var", self)]


class ReLU:
    def __init__(self, spec, rng, dtype):
        self.spec = spec
        self._mask = None

    def forward(self, x, train, rng):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy):
        return np.where(self._mask, dy, 0.0)

    def params(self):
        return []

    def buffers(self):
        return []


class Dropout:
    """Inverted dropout: survivors scaled by 1/(1-p) in train mode, identity in eval."""

    def __init__(self, spec: LayerSpec, rng, dtype):
        self.spec = spec
        self.p = spec.dropout_p
        self._mask = None

    def forward(self, x, train, rng):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise StateError("train-mode dropout needs an rng")
        keep = (rng.random(x.shape) >= self.p).astype(x.dtype)
        self._mask = keep / (1.0 - self.p)
        return x * self._mask

    def backward(self, dy):
        if self._mask is None:
            return dy
        return dy * self._mask

    def params(self):
        return []

    def buffers(self):
        return []


class _ResidualMarker:
    def __init__(self, spec, rng, dtype):
        self.spec = spec

    def params(self):
        return []

    def buffers(self):
        return []


_LAYER_CLASSES = {
    "linear": Linear,
    "batchnorm": BatchNorm,
    "relu": ReLU,
    "dropout": Dropout,
    "residual-begin": _ResidualMarker,
    "residual-end": _ResidualMarker,
}


class MlpModel:
    """Sequential layer stack with identity residual spans.

    A forward pass retains per-layer intermediates; backward() consumes them
    and accumulates parameter gradients.
    """

    def __init__(self, specs: list[LayerSpec], seed: int = 0, dtype=np.float32):
        n_begin = sum(1 for s in specs if s.kind == "residual-begin")
        n_end = sum(1 for s in specs if s.kind == "residual-end")
        if n_begin != n_end:
            raise ParameterError("residual-begin/end must come in matched pairs")
        self.specs = list(specs)
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        self.layers = [_LAYER_CLASSES[s.kind](s, rng, dtype) for s in specs]
        self._forwarded = False
        self._res_saved: list[np.ndarray] = []

    # -- execution ---------------------------------------------------------

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        x = np.ascontiguousarray(np.asarray(x, dtype=self.dtype))
        if x.ndim == 1:
            x = x[None, :]
        stack: list[np.ndarray] = []
        self._res_saved = []
        for layer in self.layers:
            kind = layer.spec.kind
            if kind == "residual-begin":
                stack.append(x)
            elif kind == "residual-end":
                x = x + stack.pop()
            else:
                x = layer.forward(x, train, rng)
        if stack:
            raise ParameterError("unterminated residual span")
        self._forwarded = True
        return x

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if not self._forwarded:
            raise StateError("backward called before forward")
        dy = np.asarray(dy, dtype=self.dtype)
        if dy.ndim == 1:
            dy = dy[None, :]
        pending: list[np.ndarray] = []
        for layer in reversed(self.layers):
            kind = layer.spec.kind
            if kind == "residual-end":
                pending.append(dy)
            elif kind == "residual-begin":
                dy = dy + pending.pop()
            else:
                dy = layer.backward(dy)
        self._forwarded = False
        return dy

    # -- parameter access --------------------------------------------------

    def parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name, t in layer.params():
                out.append((f"layer{i}.{name}", t))
        return out

    def buffers(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, BatchNorm):
                out.append((f"layer{i}.running_mean", layer.running_mean))
                out.append((f"layer{i}.running_var", layer.running_var))
        return out

    def set_buffer(self, name: str, value: np.ndarray):
        idx, attr = name.split(".", 1)
        layer = self.layers[int(idx.removeprefix("layer"))]
        setattr(layer, attr, np.asarray(value, dtype=self.dtype))

    def zero_grad(self):
        for _, t in self.parameters():
            t.zero_grad()

    @property
    def in_dim(self) -> int:
        for s in self.specs:
            if s.kind == "linear":
                return s.in_dim
        raise ParameterError("model has no linear layer")

    @property
    def out_dim(self) -> int:
        for s in reversed(self.specs):
            if s.kind == "linear":
                return s.out_dim
        raise ParameterError("model has no linear layer")

    def num_params(self) -> int:
        return sum(t.value.size for _, t in self.parameters())

    # -- conversion --------------------------------------------------------

    def astype(self, dtype) -> "MlpModel":
        """Deep copy with parameters and buffers cast to ``dtype``."""
        clone = MlpModel(self.specs, seed=0, dtype=dtype)
        src = dict(self.parameters())
        for name, t in clone.parameters():
            t.value = src[name].value.astype(dtype)
        for name, value in self.buffers():
            clone.set_buffer(name, value.astype(dtype))
        return clone

    def set_dropout(self, p: float):
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.p = p


# -- losses ----------------------------------------------------------------


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean of squared differences over all elements, with gradient wrt pred."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    grad = (2.0 / diff.size) * diff
    return loss, grad


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy averaged over the batch, with gradient wrt logits."""
    logits = np.asarray(logits)
    if logits.ndim == 1:
        logits = logits[None, :]
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, c = logits.shape
    if labels.shape[0] != n:
        raise ShapeError("label count must match batch size")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= c:
        raise ParameterError(f"labels must lie in [0, {c})")
    shifted = logits.astype(np.float64) - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss = float(-np.mean(np.log(probs[np.arange(n), labels] + 1e-300)))
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)


def softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


# -- optimizer -------------------------------------------------------------


@dataclass
class TrainSchedule:
    """Optimizer schedule: step-decay learning rate with Adam."""

    epochs: int = 300
    lr0: float = 0.01
    decay_epochs: tuple[float, ...] = (0.5, 0.75)  # fractions of total epochs
    weight_decay: float = 0.0005
    dropout_p: float = 0.5
    batch_size: int = 256
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ParameterError("lr0 must be positive")
        if any(not 0.0 < f < 1.0 for f in self.decay_epochs):
            raise ParameterError("decay fractions must lie in (0, 1)")


def lr_at(schedule: TrainSchedule, epoch: int) -> float:
    """Learning rate for a 0-based epoch index: lr0 divided by 10 at each decay point."""
    drops = sum(1 for f in schedule.decay_epochs if epoch >= f * schedule.epochs)
    return schedule.lr0 * (0.1**drops)


class AdamState:
    """First/second moment accumulators, one pair per named parameter."""

    def __init__(self, params: list[tuple[str, Tensor]]):
        self.m = {name: np.zeros_like(t.value) for name, t in params}
        self.v = {name: np.zeros_like(t.value) for name, t in params}
        self.t = 0


def adam_step(
    params: list[tuple[str, Tensor]],
    state: AdamState,
    schedule: TrainSchedule,
    lr: float,
):
    """One bias-corrected Adam update; weight decay is added to the gradient."""
    state.t += 1
    b1, b2, eps = schedule.beta1, schedule.beta2, schedule.eps
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, p in params:
        if p.grad is None:
            raise StateError(f"parameter {name} has no gradient")
        g = p.grad
        if schedule.weight_decay:
            g = g + schedule.weight_decay * p.value
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p.value -= (lr / bc1) * m / (np.sqrt(v / bc2) + eps)


# -- gradient checking -----------------------------------------------------


def grad_check(
    model: MlpModel,
    x: np.ndarray,
    loss_fn,
    n_params: int = 100,
    h: float = 1e-5,
    seed: int = 0,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    Runs on a float64 clone with dropout disabled; ``loss_fn`` maps the network
    output to (scalar loss, gradient wrt output). Sampled parameters whose
    perturbation flips a ReLU activation (a kink crossing, where the
    difference quotient is meaningless) are skipped and redrawn.
    """
    m64 = model.astype(np.float64)
    m64.set_dropout(0.0)
    x = np.asarray(x, dtype=np.float64)

    def loss_only():
        y = m64.forward(x, train=True, rng=None)
        loss, _ = loss_fn(y)
        masks = tuple(
            layer._mask.tobytes() for layer in m64.layers if isinstance(layer, ReLU)
        )
        return loss, masks

    m64.zero_grad()
    y = m64.forward(x, train=True, rng=None)
    _, dy = loss_fn(y)
    m64.backward(dy)

    rng = np.random.default_rng(seed)
    named = m64.parameters()
    sizes = np.array([t.value.size for _, t in named])
    cum = np.cumsum(sizes)
    total = int(cum[-1])
    want = min(n_params, total)
    checked: set[int] = set()
    worst = 0.0
    attempts = 0
    while len(checked) < want and attempts < 20 * want:
        attempts += 1
        g = int(rng.integers(total))
        if g in checked:
            continue
        pi = int(np.searchsorted(cum, g, side="right"))
        t = named[pi][1]
        i = int(g - (cum[pi] - sizes[pi]))
        orig = t.value.flat[i]
        evals = {}
        mask_sets = []
        for step in (h, -h, 2 * h, -2 * h):
            t.value.flat[i] = orig + step
            evals[step], masks = loss_only()
            mask_sets.append(masks)
        t.value.flat[i] = orig
        if any(ms != mask_sets[0] for ms in mask_sets[1:]):
            continue  # kink crossing, redraw
        checked.add(g)
        # fourth-order central difference: batchnorm's curvature makes the
        # plain two-point quotient truncation-limited above 1e-6
        numeric = (
            8.0 * (evals[h] - evals[-h]) - (evals[2 * h] - evals[-2 * h])
        ) / (12.0 * h)
        analytic = t.grad.flat[i]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst
