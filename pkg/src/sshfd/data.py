"""Labeled pose records, the JSONL interchange format, and the COCO importer.

JSONL schema (one record per line):
  id        string
  label     "fall" | "no_fall"
  class     pose class name (free-form string)
  joints2d  17 x [x, y, v] in image pixels, v in {0, 1}
  joints3d  17 x [x, y, z] world millimetres, or null
  camera    optional camera dict (see camera.Camera.to_dict)
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .camera import Camera
from .errors import DataError
from .layout import COCO_LAYOUT, JointLayout
from .pose import Pose2D, Pose3D

LABELS = ("no_fall", "fall")
LABEL_TO_INDEX = {name: i for i, name in enumerate(LABELS)}


@dataclass
class PoseRecord:
    id: str
    joints2d: Pose2D  # image pixels
    joints3d: Pose3D | None  # world mm
    label: str  # "fall" | "no_fall"
    class_name: str = ""
    camera: Camera | None = None
    bbox: tuple[float, float, float, float] | None = None  # (x0, y0, x1, y1) px

    def __post_init__(self):
        if self.label not in LABELS:
            raise DataError(f"record {self.id}: unknown label {self.label!r}")

    @property
    def label_index(self) -> int:
        return LABEL_TO_INDEX[self.label]

    def to_dict(self) -> dict:
        j2 = [
            [float(x), float(y), 1 if v else 0]
            for (x, y), v in zip(self.joints2d.coords, self.joints2d.visibility)
        ]
        j3 = None
        if self.joints3d is not None:
            j3 = [[float(a) for a in row] for row in self.joints3d.coords]
        return {
            "id": self.id,
            "label": self.label,
            "class": self.class_name,
            "joints2d": j2,
            "joints3d": j3,
            "camera": self.camera.to_dict() if self.camera else None,
            "bbox": list(self.bbox) if self.bbox else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PoseRecord":
        j2 = np.asarray(d["joints2d"], dtype=np.float64)
        if j2.ndim != 2 or j2.shape[1] != 3:
            raise DataError(f"record {d.get('id')}: joints2d must be Kx3")
        vis = j2[:, 2] > 0
        pose2d = Pose2D(j2[:, :2], vis, vis.astype(np.float64))
        pose3d = None
        if d.get("joints3d") is not None:
            j3 = np.asarray(d["joints3d"], dtype=np.float64)
            if j3.shape != (j2.shape[0], 3):
                raise DataError(f"record {d.get('id')}: joints3d must be Kx3")
            pose3d = Pose3D(j3, np.ones(j3.shape[0], dtype=bool))
        cam = Camera.from_dict(d["camera"]) if d.get("camera") else None
        bbox = tuple(d["bbox"]) if d.get("bbox") else None
        return cls(
            id=str(d["id"]),
            joints2d=pose2d,
            joints3d=pose3d,
            label=d["label"],
            class_name=d.get("class", ""),
            camera=cam,
            bbox=bbox,
        )


@dataclass
class PoseDataset:
    records: list[PoseRecord]
    layout: JointLayout = COCO_LAYOUT
    source: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def labels(self) -> np.ndarray:
        return np.array([r.label_index for r in self.records], dtype=np.int64)

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.records:
            counts[r.class_name] = counts.get(r.class_name, 0) + 1
        return counts

    def split(self, train_frac: float, seed: int) -> tuple["PoseDataset", "PoseDataset"]:
        """Random shuffle split (default convention: 70% train / 30% test)."""
        idx = np.random.default_rng(seed).permutation(len(self.records))
        cut = int(round(train_frac * len(self.records)))
        train = [self.records[i] for i in idx[:cut]]
        test = [self.records[i] for i in idx[cut:]]
        return (
            PoseDataset(train, self.layout, self.source),
            PoseDataset(test, self.layout, self.source),
        )


def write_jsonl(dataset: PoseDataset, path):
    with open(path, "w") as f:
        for r in dataset.records:
            f.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_jsonl(path, layout: JointLayout = COCO_LAYOUT) -> PoseDataset:
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON ({e})") from e
            records.append(PoseRecord.from_dict(d))
    return PoseDataset(records, layout, source=str(path))


def import_coco_keypoints(doc: dict, layout: JointLayout = COCO_LAYOUT) -> PoseDataset:
    """Build records from a COCO keypoint-annotation document.

    Accepts the standard layout: annotations with a flat 17x3 ``keypoints``
    list of [x, y, v] triples, v in {0, 1, 2}; v > 0 counts as visible.
    Labels are not part of COCO; records come back as "no_fall" placeholders
    with the annotation id preserved.
    """
    anns = doc.get("annotations")
    if anns is None:
        raise DataError("document has no 'annotations' list")
    records = []
    for ann in anns:
        kp = np.asarray(ann.get("keypoints", []), dtype=np.float64)
        if kp.size != layout.K * 3:
            raise DataError(f"annotation {ann.get('id')}: expected {layout.K}x3 keypoints")
        kp = kp.reshape(layout.K, 3)
        vis = kp[:, 2] > 0
        pose = Pose2D(kp[:, :2], vis, vis.astype(np.float64))
        bbox = None
        if ann.get("bbox") is not None:
            x, y, w, h = ann["bbox"]
            bbox = (float(x), float(y), float(x + w), float(y + h))
        records.append(
            PoseRecord(
                id=str(ann.get("id", len(records))),
                joints2d=pose,
                joints3d=None,
                label="no_fall",
                class_name="unlabeled",
                bbox=bbox,
            )
        )
    return PoseDataset(records, layout, source="coco")
