"""Save/load wrappers tying model configs to the checkpoint container."""
from __future__ import annotations

from dataclasses import asdict

from .engine import MlpModel, TrainSchedule, load_checkpoint, save_checkpoint
from .errors import CheckpointError
from .fallnet import FallNetConfig, FallNetModel
from .layout import JointLayout
from .posenet3d import PoseNet3dConfig


def _layout_meta(layout: JointLayout) -> dict:
    return {"names": list(layout.names), "hip_index": layout.hip_index}


def layout_from_meta(meta: dict) -> JointLayout:
    return JointLayout(tuple(meta["names"]), meta["hip_index"])


def save_posenet(
    path, model: MlpModel, cfg: PoseNet3dConfig, schedule: TrainSchedule, layout: JointLayout
):
    cfg_d = asdict(cfg)
    cfg_d["residual_spans"] = [list(s) for s in cfg.residual_spans]
    meta = {
        "kind": "posenet3d",
        "config": cfg_d,
        "schedule": asdict(schedule),
        "layout": _layout_meta(layout),
    }
    save_checkpoint(path, {"model": model}, meta)


def load_posenet(path) -> tuple[MlpModel, PoseNet3dConfig, dict]:
    models, meta = load_checkpoint(path)
    if meta.get("kind") != "posenet3d" or "model" not in models:
        raise CheckpointError(f"{path} is not a posenet3d checkpoint")
    cfg_d = dict(meta["config"])
    cfg_d["residual_spans"] = tuple(tuple(s) for s in cfg_d["residual_spans"])
    return models["model"], PoseNet3dConfig(**cfg_d), meta


def save_fallnet(path, model: FallNetModel, schedule: TrainSchedule, layout: JointLayout):
    meta = {
        "kind": "fallnet",
        "config": asdict(model.cfg),
        "schedule": asdict(schedule),
        "layout": _layout_meta(layout),
    }
    save_checkpoint(path, model.submodels(), meta)


def load_fallnet(path) -> tuple[FallNetModel, dict]:
    models, meta = load_checkpoint(path)
    if meta.get("kind") != "fallnet":
        raise CheckpointError(f"{path} is not a fallnet checkpoint")
    cfg = FallNetConfig(**meta["config"])
    model = FallNetModel(cfg, seed=0)
    for name in ("branch_p", "branch_q", "head"):
        if name not in models:
            raise CheckpointError(f"fallnet checkpoint missing submodel {name!r}")
        setattr(model, name, models[name])
    return model, meta
