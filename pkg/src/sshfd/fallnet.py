"""Two-modality fall classifier: per-modality feature branches fused by
elementwise summation, then a small embedding head producing class logits.

The 2d branch consumes the normalized 2K pose vector; the 3d branch consumes
the (scaled) 3K pose vector, by default as predicted by a frozen lifter from
the same (possibly occluded) 2d input. Class 0 is "no_fall", class 1 is
"fall"; argmax tie-breaks toward no_fall.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LABELS, PoseDataset, PoseRecord
from .engine import (
    AdamState,
    LayerSpec,
    MlpModel,
    TrainSchedule,
    adam_step,
    cross_entropy_loss,
    lr_at,
)
from .engine.core import softmax
from .errors import DataError, DegenerateLabelsError, NumericError, ParameterError, ShapeError
from .features import build_2d_inputs, target_vec_3d
from .layout import COCO_LAYOUT, DEFAULT_FRAME, JointLayout, ReferenceFrame
from .ojr import OjrConfig, PatternStream


@dataclass
class FallNetConfig:
    K: int = 17
    feat_dim: int = 1024
    embed_dim: int = 256
    n_branch_blocks: int = 2
    n_classes: int = 2
    dropout_p: float = 0.5
    use_3d: bool = True  # False: 2d-only ablation, the 3d branch is fed zeros
    use_gt_3d: bool = False  # True: train on ground-truth 3d instead of lifter output

    def __post_init__(self):
        if self.feat_dim <= 0 or self.n_classes < 2 or self.n_branch_blocks < 2:
            raise ParameterError("invalid fallnet config")

    @property
    def p_dim(self) -> int:
        return 2 * self.K

    @property
    def q_dim(self) -> int:
        return 3 * self.K


@dataclass
class FallPrediction:
    probs: np.ndarray  # (n_classes,)
    logits: np.ndarray  # (n_classes,)

    @property
    def label_index(self) -> int:
        return int(np.argmax(self.probs))  # first max wins: ties go to no_fall

    @property
    def label(self) -> str:
        return LABELS[self.label_index]

    @property
    def fall_probability(self) -> float:
        return float(self.probs[1])


def _branch_specs(in_dim: int, cfg: FallNetConfig) -> list[LayerSpec]:
    d, p = cfg.feat_dim, cfg.dropout_p
    specs = [
        LayerSpec("linear", in_dim, d),
        LayerSpec("batchnorm", d, d),
        LayerSpec("relu", d, d),
        LayerSpec("dropout", d, d, p),
    ]
    # remaining equal-width blocks under one identity residual span
    specs.append(LayerSpec("residual-begin"))
    for _ in range(cfg.n_branch_blocks - 1):
        specs += [
            LayerSpec("linear", d, d),
            LayerSpec("batchnorm", d, d),
            LayerSpec("relu", d, d),
            LayerSpec("dropout", d, d, p),
        ]
    specs.append(LayerSpec("residual-end"))
    return specs


def _head_specs(cfg: FallNetConfig) -> list[LayerSpec]:
    d, e, p = cfg.feat_dim, cfg.embed_dim, cfg.dropout_p
    return [
        LayerSpec("linear", d, e),
        LayerSpec("batchnorm", e, e),
        LayerSpec("relu", e, e),
        LayerSpec("dropout", e, e, p),
        LayerSpec("linear", e, cfg.n_classes),
    ]


class FallNetModel:
    """Branch pair + embedding head with sum fusion."""

    def __init__(self, cfg: FallNetConfig, seed: int = 0):
        self.cfg = cfg
        self.branch_p = MlpModel(_branch_specs(cfg.p_dim, cfg), seed=seed)
        self.branch_q = MlpModel(_branch_specs(cfg.q_dim, cfg), seed=seed + 1)
        self.head = MlpModel(_head_specs(cfg), seed=seed + 2)

    def submodels(self) -> dict[str, MlpModel]:
        return {"branch_p": self.branch_p, "branch_q": self.branch_q, "head": self.head}

    def parameters(self):
        out = []
        for prefix, m in self.submodels().items():
            out += [(f"{prefix}.{name}", t) for name, t in m.parameters()]
        return out

    def zero_grad(self):
        for m in self.submodels().values():
            m.zero_grad()

    def forward(self, p: np.ndarray, q: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        p = np.atleast_2d(np.asarray(p))
        q = np.atleast_2d(np.asarray(q))
        if p.shape[1] != self.cfg.p_dim or q.shape[1] != self.cfg.q_dim:
            raise ShapeError(
                f"expected widths ({self.cfg.p_dim}, {self.cfg.q_dim}), "
                f"got ({p.shape[1]}, {q.shape[1]})"
            )
        if not self.cfg.use_3d:
            q = np.zeros_like(q)
        h = self.branch_p.forward(p, train, rng) + self.branch_q.forward(q, train, rng)
        return self.head.forward(h, train, rng)

    def backward(self, dlogits: np.ndarray):
        dh = self.head.backward(dlogits)
        self.branch_p.backward(dh)
        self.branch_q.backward(dh)

    def astype(self, dtype) -> "FallNetModel":
        clone = FallNetModel(self.cfg, seed=0)
        clone.branch_p = self.branch_p.astype(dtype)
        clone.branch_q = self.branch_q.astype(dtype)
        clone.head = self.head.astype(dtype)
        return clone

    def set_dropout(self, p: float):
        for m in self.submodels().values():
            m.set_dropout(p)


def build_fallnet(cfg: FallNetConfig, seed: int = 0) -> FallNetModel:
    return FallNetModel(cfg, seed)


def classify(model: FallNetModel, p: np.ndarray, q: np.ndarray) -> FallPrediction:
    """Eval-mode prediction for a single (2K, 3K) input pair."""
    logits = model.forward(p, q, train=False)[0]
    return FallPrediction(probs=softmax(logits), logits=np.asarray(logits, dtype=np.float64))


def classify_batch(model: FallNetModel, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Predicted label indices for stacked inputs."""
    logits = model.forward(P, Q, train=False)
    return np.argmax(logits, axis=1)


def _lifter_outputs(posenet: MlpModel, X: np.ndarray, batch_size: int = 2048) -> np.ndarray:
    outs = [
        posenet.forward(X[i : i + batch_size], train=False)
        for i in range(0, len(X), batch_size)
    ]
    return np.concatenate(outs)


def train_fallnet(
    dataset: PoseDataset,
    posenet: MlpModel | None,
    schedule: TrainSchedule,
    ojr_cfg: OjrConfig | None = None,
    cfg: FallNetConfig | None = None,
    val_records: list[PoseRecord] | None = None,
    frame: ReferenceFrame = DEFAULT_FRAME,
    init_model: FallNetModel | None = None,
) -> tuple[FallNetModel, list[dict]]:
    """Train the classifier; q comes from the frozen lifter unless cfg.use_gt_3d.

    Passing ``init_model`` continues training that model in place (with a fresh
    optimizer state) instead of starting from a new initialization, which
    supports multi-phase recipes such as a short clean annealing pass after
    occlusion-augmented training.

    History rows: epoch, lr, train_loss, val_accuracy (NaN without val records).
    """
    if len(dataset) == 0:
        raise DegenerateLabelsError("cannot train on an empty dataset")
    labels = dataset.labels()
    if len(set(labels.tolist())) < 2:
        raise DegenerateLabelsError("training data must contain both classes")
    layout = dataset.layout
    if init_model is not None:
        if cfg is not None and cfg != init_model.cfg:
            raise ParameterError("cfg does not match the warm-start model")
        cfg = init_model.cfg
    else:
        cfg = cfg or FallNetConfig(K=layout.K)
    if posenet is None and cfg.use_3d and not cfg.use_gt_3d:
        raise ParameterError("a frozen lifter is required unless use_gt_3d or 2d-only")
    ojr_cfg = ojr_cfg or OjrConfig(enabled=False)
    model = init_model if init_model is not None else FallNetModel(cfg, seed=schedule.seed)
    state = AdamState(model.parameters())
    rng = np.random.default_rng(schedule.seed + 1)
    stream = PatternStream(ojr_cfg, layout.K)

    records = list(dataset.records)
    X0 = build_2d_inputs(records, None, frame)
    n = X0.shape[0]
    Qgt = None
    if cfg.use_gt_3d:
        Qgt = np.stack([target_vec_3d(r, layout, frame) for r in records])

    history = []
    for epoch in range(schedule.epochs):
        lr = lr_at(schedule, epoch)
        order = rng.permutation(n)
        X = X0.reshape(n, layout.K, 2).copy()
        if ojr_cfg.enabled:
            for i in range(n):
                hidden = stream.next().v == 0
                X[i, hidden] = -1.0
        X = X.reshape(n, -1)
        if cfg.use_gt_3d:
            Q = Qgt
        elif cfg.use_3d:
            Q = _lifter_outputs(posenet, X)
        else:
            Q = np.zeros((n, cfg.q_dim), dtype=np.float32)
        losses = []
        for start in range(0, n, schedule.batch_size):
            idx = order[start : start + schedule.batch_size]
            model.zero_grad()
            logits = model.forward(X[idx], Q[idx], train=True, rng=rng)
            loss, dlogits = cross_entropy_loss(logits, labels[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            model.backward(dlogits)
            adam_step(model.parameters(), state, schedule, lr)
            losses.append(loss)
        val_acc = float("nan")
        if val_records:
            val_acc = evaluate_accuracy(model, posenet, val_records, layout, frame=frame)
        history.append(
            {
                "epoch": epoch,
                "lr": lr,
                "train_loss": float(np.mean(losses)),
                "val_accuracy": val_acc,
            }
        )
    return model, history


def fallnet_inputs(
    model: FallNetModel,
    posenet: MlpModel | None,
    records: list[PoseRecord],
    layout: JointLayout,
    masks=None,
    frame: ReferenceFrame = DEFAULT_FRAME,
) -> tuple[np.ndarray, np.ndarray]:
    """(P, Q) evaluation inputs for records, with optional occlusion masks."""
    X = build_2d_inputs(records, masks, frame)
    cfg = model.cfg
    if cfg.use_gt_3d:
        Q = np.stack([target_vec_3d(r, layout, frame) for r in records])
    elif cfg.use_3d:
        Q = _lifter_outputs(posenet, X)
    else:
        Q = np.zeros((len(X), cfg.q_dim), dtype=np.float32)
    return X, Q


def recalibrate_batchnorm(
    model: FallNetModel,
    P: np.ndarray,
    Q: np.ndarray,
    batch_size: int = 256,
    n_batches: int = 100,
    seed: int = 0,
):
    """Refresh batchnorm running statistics on a reference input distribution.

    Occlusion-augmented training leaves the running means/variances matched to
    the mixed clean/occluded batch distribution; replaying clean batches in
    train mode (dropout off, no parameter updates) re-centers them for
    deployment on unoccluded inputs.
    """
    P = np.asarray(P)
    Q = np.asarray(Q)
    saved_p = model.cfg.dropout_p
    model.set_dropout(0.0)
    rng = np.random.default_rng(seed)
    n = len(P)
    try:
        for _ in range(n_batches):
            idx = rng.choice(n, size=min(batch_size, n), replace=False)
            model.forward(P[idx], Q[idx], train=True, rng=None)
            for sub in model.submodels().values():
                sub._forwarded = False
    finally:
        model.set_dropout(saved_p)


def grad_check_fallnet(
    model: FallNetModel,
    p: np.ndarray,
    q: np.ndarray,
    labels: np.ndarray,
    n_params: int = 100,
    h: float = 1e-5,
    seed: int = 0,
) -> float:
    """Worst relative error of analytic vs finite-difference gradients over the
    full fused graph (both branches plus head), on a float64 clone with dropout
    off. Uses the same fourth-order stencil and ReLU kink redraw policy as the
    single-model checker."""
    from .engine.core import ReLU

    m64 = model.astype(np.float64)
    m64.set_dropout(0.0)
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    relus = [
        layer
        for sub in m64.submodels().values()
        for layer in sub.layers
        if isinstance(layer, ReLU)
    ]

    def loss_only():
        logits = m64.forward(p, q, train=True, rng=None)
        loss, _ = cross_entropy_loss(logits, labels)
        return loss, tuple(layer._mask.tobytes() for layer in relus)

    m64.zero_grad()
    logits = m64.forward(p, q, train=True, rng=None)
    _, dlogits = cross_entropy_loss(logits, labels)
    m64.backward(dlogits)

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
            continue
        checked.add(g)
        numeric = (
            8.0 * (evals[h] - evals[-h]) - (evals[2 * h] - evals[-2 * h])
        ) / (12.0 * h)
        analytic = t.grad.flat[i]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def evaluate_accuracy(
    model: FallNetModel,
    posenet: MlpModel | None,
    records: list[PoseRecord],
    layout: JointLayout,
    masks=None,
    frame: ReferenceFrame = DEFAULT_FRAME,
) -> float:
    P, Q = fallnet_inputs(model, posenet, records, layout, masks, frame)
    preds = classify_batch(model, P, Q)
    gts = np.array([r.label_index for r in records])
    return float((preds == gts).mean())
