"""Built-in verification: fast end-to-end sanity checks runnable from the CLI."""
from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from .engine import MlpModel, grad_check, load_checkpoint, mse_loss, save_checkpoint
from .engine.core import cross_entropy_loss
from .errors import CheckpointError
from .evalharness import weighted_prf
from .heatmap import decode_heatmaps, encode_heatmaps
from .layout import COCO_LAYOUT, DEFAULT_FRAME
from .pose import Pose2D, Pose3D, normalize_pose2d, normalize_pose3d
from .posenet3d import PoseNet3dConfig, build_posenet3d
from .fallnet import FallNetConfig, FallNetModel


def _check_gradients() -> bool:
    cfg = PoseNet3dConfig(hidden0=32, hidden=48)
    model = build_posenet3d(cfg, seed=0)
    x = np.random.default_rng(0).uniform(-1, 1, (4, cfg.in_dim))
    target = np.random.default_rng(1).normal(size=(4, cfg.out_dim))
    err = grad_check(model, x, lambda y: mse_loss(y, target), n_params=60)
    if err >= 1e-6:
        return False
    fcfg = FallNetConfig(feat_dim=32, embed_dim=16)
    branch = FallNetModel(fcfg, seed=0).branch_p
    xb = np.random.default_rng(2).uniform(-1, 1, (4, fcfg.p_dim))
    tb = np.random.default_rng(3).normal(size=(4, fcfg.feat_dim))
    return grad_check(branch, xb, lambda y: mse_loss(y, tb), n_params=60) < 1e-6


def _check_normalization() -> bool:
    rng = np.random.default_rng(4)
    K = COCO_LAYOUT.K
    coords = rng.uniform(50, 150, (K, 2))
    pose = Pose2D(coords, np.ones(K, bool), np.ones(K))
    bbox = (40.0, 45.0, 160.0, 170.0)
    base = normalize_pose2d(pose, bbox)
    shifted = Pose2D(coords * 3.0 + 17.0, np.ones(K, bool), np.ones(K))
    sbbox = tuple(v * 3.0 + 17.0 for v in bbox)
    moved = normalize_pose2d(shifted, sbbox)
    if not np.allclose(base.coords, moved.coords, rtol=1e-9, atol=1e-9):
        return False
    p3 = Pose3D(rng.normal(500, 200, (K, 3)), np.ones(K, bool))
    n3 = normalize_pose3d(p3, COCO_LAYOUT)
    if not (n3.coords[COCO_LAYOUT.hip_index] == 0).all():
        return False
    d0 = np.linalg.norm(p3.coords[:, None] - p3.coords[None], axis=-1)
    d1 = np.linalg.norm(n3.coords[:, None] - n3.coords[None], axis=-1)
    return np.allclose(d0, d1, rtol=1e-9, atol=1e-6)


def _check_heatmaps() -> bool:
    K = COCO_LAYOUT.K
    coords = np.tile([[32.0, 30.0]], (K, 1))
    pose = Pose2D(coords, np.ones(K, bool), np.ones(K))
    stack = encode_heatmaps(pose, 64, 64, sigma=4.0)
    peak = stack.data[:, :, 0].max()
    if abs(peak - stack.amplitude) > 1e-12:
        return False
    if abs(stack.data[:, :, 0].sum() - 1.0) > 1e-3:
        return False
    decoded = decode_heatmaps(stack)
    return np.array_equal(decoded.coords, coords)


def _check_metrics() -> bool:
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(1, 50))
        gts = rng.integers(0, 2, n)
        preds = rng.integers(0, 2, n)
        rep = weighted_prf(preds, gts, n_classes=2)
        # independent per-class recompute
        w_f1 = 0.0
        for c in (0, 1):
            tp = int(((preds == c) & (gts == c)).sum())
            fp = int(((preds == c) & (gts != c)).sum())
            fn = int(((preds != c) & (gts == c)).sum())
            p = tp / (tp + fp) if tp + fp else 0.0
            r = tp / (tp + fn) if tp + fn else 0.0
            f1 = 2 * p * r / (p + r) if p + r else 0.0
            w_f1 += (tp + fn) * f1
        if abs(rep.weighted_f1 - w_f1 / n) > 1e-12:
            return False
    return True


def _check_checkpoint() -> bool:
    cfg = PoseNet3dConfig(hidden0=16, hidden=24)
    model = build_posenet3d(cfg, seed=3)
    x = np.random.default_rng(6).uniform(-1, 1, (2, cfg.in_dim)).astype(np.float32)
    before = model.forward(x, train=False)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "m.ckpt"
        save_checkpoint(path, {"model": model}, {"kind": "selftest"})
        loaded, _ = load_checkpoint(path)
        after = loaded["model"].forward(x, train=False)
        if not np.array_equal(before, after):
            return False
        # corrupting the payload must be detected
        blob = bytearray(path.read_bytes())
        trunc = Path(tmp) / "bad.ckpt"
        trunc.write_bytes(bytes(blob[: len(blob) // 2]))
        try:
            load_checkpoint(trunc)
        except CheckpointError:
            return True
        return False


CHECKS = [
    ("gradient check", _check_gradients),
    ("normalization invariants", _check_normalization),
    ("heatmap codec", _check_heatmaps),
    ("metric oracle", _check_metrics),
    ("checkpoint roundtrip", _check_checkpoint),
]


def run_selftest(verbose: bool = False) -> bool:
    ok = True
    for name, fn in CHECKS:
        passed = fn()
        ok = ok and passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
