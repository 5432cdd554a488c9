"""2d -> 3d pose lifting network and its training loop.

Architecture: fc_2d (2K -> hidden0) followed by n_hidden_layers blocks of
linear + batchnorm + ReLU + dropout (first block widens hidden0 -> hidden,
the rest are hidden -> hidden) with identity residual spans over equal-width
block pairs, and a final fc_3d (hidden -> 3K) regression head.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import PoseDataset, PoseRecord
from .engine import AdamState, LayerSpec, MlpModel, TrainSchedule, adam_step, lr_at, mse_loss
from .errors import DataError, NumericError, ParameterError, ShapeError
from .features import build_lifting_arrays, input_vec_2d, pose3d_from_output
from .layout import COCO_LAYOUT, DEFAULT_FRAME, JointLayout, ReferenceFrame
from .ojr import OjrConfig, PatternStream
from .pose import Pose2D, Pose3D


@dataclass
class PoseNet3dConfig:
    K: int = 17
    hidden0: int = 1024
    hidden: int = 4096
    n_hidden_layers: int = 5
    dropout_p: float = 0.5
    # spans over 1-based hidden-block indices; endpoints must share width
    residual_spans: tuple[tuple[int, int], ...] = ((2, 3), (4, 5))

    def __post_init__(self):
        if self.K <= 0 or self.hidden0 <= 0 or self.hidden <= 0:
            raise ParameterError("widths must be positive")
        for begin, end in self.residual_spans:
            if not 1 <= begin <= end <= self.n_hidden_layers:
                raise ParameterError(f"residual span ({begin}, {end}) out of range")
            if begin == 1:
                # block 1 input is hidden0-wide; identity skip needs equal widths
                raise ParameterError("residual span cannot start at the widening block")

    @property
    def in_dim(self) -> int:
        return 2 * self.K

    @property
    def out_dim(self) -> int:
        return 3 * self.K


def _block(in_dim: int, out_dim: int, dropout_p: float) -> list[LayerSpec]:
    return [
        LayerSpec("linear", in_dim, out_dim),
        LayerSpec("batchnorm", out_dim, out_dim),
        LayerSpec("relu", out_dim, out_dim),
        LayerSpec("dropout", out_dim, out_dim, dropout_p),
    ]


def build_posenet3d(cfg: PoseNet3dConfig, seed: int = 0) -> MlpModel:
    specs: list[LayerSpec] = [LayerSpec("linear", cfg.in_dim, cfg.hidden0)]
    begins = {b for b, _ in cfg.residual_spans}
    ends = {e for _, e in cfg.residual_spans}
    for i in range(1, cfg.n_hidden_layers + 1):
        if i in begins:
            specs.append(LayerSpec("residual-begin"))
        in_dim = cfg.hidden0 if i == 1 else cfg.hidden
        specs.extend(_block(in_dim, cfg.hidden, cfg.dropout_p))
        if i in ends:
            specs.append(LayerSpec("residual-end"))
    specs.append(LayerSpec("linear", cfg.hidden, cfg.out_dim))
    return MlpModel(specs, seed=seed)


def lift(
    model: MlpModel,
    pose: Pose2D | np.ndarray,
    layout: JointLayout = COCO_LAYOUT,
    frame: ReferenceFrame = DEFAULT_FRAME,
) -> Pose3D:
    """Lift one normalized 2d pose to a hip-relative 3d pose in millimetres."""
    vec = input_vec_2d(pose, frame) if isinstance(pose, Pose2D) else np.asarray(pose)
    if vec.shape[-1] != model.in_dim:
        raise ShapeError(f"expected input width {model.in_dim}, got {vec.shape[-1]}")
    out = model.forward(vec, train=False)[0]
    return pose3d_from_output(out, layout, frame)


def mpjpe(pred, gt) -> float:
    """Mean Euclidean joint distance in millimetres over samples and joints."""
    pa = _as_coords(pred)
    ga = _as_coords(gt)
    if pa.shape != ga.shape:
        raise ShapeError(f"pose set shape mismatch: {pa.shape} vs {ga.shape}")
    return float(np.linalg.norm(pa - ga, axis=-1).mean())


def _as_coords(poses) -> np.ndarray:
    if isinstance(poses, np.ndarray):
        return poses
    return np.stack([p.coords for p in poses])


def evaluate_mpjpe(
    model: MlpModel,
    records: list[PoseRecord],
    layout: JointLayout = COCO_LAYOUT,
    masks=None,
    frame: ReferenceFrame = DEFAULT_FRAME,
    batch_size: int = 1024,
) -> float:
    """MPJPE of the lifter over records, with optional per-record occlusion masks."""
    X, Y = build_lifting_arrays(records, layout, masks, frame)
    preds = []
    for i in range(0, len(X), batch_size):
        preds.append(model.forward(X[i : i + batch_size], train=False))
    P = np.concatenate(preds).astype(np.float64)
    scale = frame.cube_side / 2.0
    pa = P.reshape(-1, layout.K, 3) * scale
    ga = Y.reshape(-1, layout.K, 3) * scale
    return float(np.linalg.norm(pa - ga, axis=-1).mean())


def train_posenet3d(
    dataset: PoseDataset,
    schedule: TrainSchedule,
    ojr_cfg: OjrConfig | None = None,
    cfg: PoseNet3dConfig | None = None,
    val_records: list[PoseRecord] | None = None,
    frame: ReferenceFrame = DEFAULT_FRAME,
) -> tuple[MlpModel, list[dict]]:
    """Train the lifter on records with 3d ground truth; returns (model, history).

    History has one row per epoch: epoch, lr, train_loss, val_mpjpe (NaN when
    no validation records are supplied).
    """
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")
    layout = dataset.layout
    for rec in dataset:
        if rec.joints3d is None:
            raise DataError(f"record {rec.id} lacks 3d ground truth")
    cfg = cfg or PoseNet3dConfig(K=layout.K)
    ojr_cfg = ojr_cfg or OjrConfig(enabled=False)
    model = build_posenet3d(cfg, seed=schedule.seed)
    state = AdamState(model.parameters())
    rng = np.random.default_rng(schedule.seed + 1)
    stream = PatternStream(ojr_cfg, layout.K)

    X0, Y = build_lifting_arrays(list(dataset.records), layout, None, frame)
    n = X0.shape[0]
    history = []
    for epoch in range(schedule.epochs):
        lr = lr_at(schedule, epoch)
        order = rng.permutation(n)
        X = X0.reshape(n, layout.K, 2).copy()
        if ojr_cfg.enabled:
            for i in range(n):
                hidden = stream.next().v == 0
                X[i, hidden] = -1.0  # (0,0) px maps to (-1,-1) after rescale
        X = X.reshape(n, -1)
        losses = []
        for start in range(0, n, schedule.batch_size):
            idx = order[start : start + schedule.batch_size]
            model.zero_grad()
            out = model.forward(X[idx], train=True, rng=rng)
            loss, dy = mse_loss(out, Y[idx].astype(out.dtype))
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            model.backward(dy)
            adam_step(model.parameters(), state, schedule, lr)
            losses.append(loss)
        val = (
            evaluate_mpjpe(model, val_records, layout, frame=frame)
            if val_records
            else float("nan")
        )
        history.append(
            {
                "epoch": epoch,
                "lr": lr,
                "train_loss": float(np.mean(losses)),
                "val_mpjpe": val,
            }
        )
    return model, history
