"""Record -> network input/target conversion.

2d inputs are normalized into the 224x224 reference frame, occluded if
requested, then rescaled to [-1, 1] per axis. 3d targets are the world pose
rotated into camera-aligned axes, hip-centered, and rescaled by half the
working-cube side so the regression operates near unit range. Occlusion is
applied after 2d normalization (zeroing happens in the reference frame).
"""
from __future__ import annotations

import numpy as np

from .camera import camera_frame_pose
from .data import PoseRecord
from .errors import DataError
from .layout import DEFAULT_FRAME, JointLayout, ReferenceFrame
from .ojr import OcclusionMask, apply_occlusion
from .pose import Pose2D, Pose3D, normalize_pose2d, normalize_pose3d, tight_bbox


def record_normalized_pose2d(
    record: PoseRecord, frame: ReferenceFrame = DEFAULT_FRAME
) -> Pose2D:
    bbox = record.bbox or tight_bbox(record.joints2d)
    return normalize_pose2d(record.joints2d, bbox, frame)


def input_vec_2d(pose: Pose2D, frame: ReferenceFrame = DEFAULT_FRAME) -> np.ndarray:
    """Flatten a reference-frame pose to 2K values in [-1, 1]."""
    scaled = pose.coords / np.array([frame.width / 2.0, frame.height / 2.0]) - 1.0
    return scaled.reshape(-1)


def target_vec_3d(
    record: PoseRecord,
    layout: JointLayout,
    frame: ReferenceFrame = DEFAULT_FRAME,
) -> np.ndarray:
    """Hip-relative camera-aligned 3d target, rescaled to the unit working cube."""
    if record.joints3d is None:
        raise DataError(f"record {record.id} has no 3d ground truth")
    if record.camera is None:
        raise DataError(f"record {record.id} has no camera; cannot align the target")
    cam_pose = camera_frame_pose(record.joints3d, record.camera)
    centered = normalize_pose3d(cam_pose, layout)
    return centered.coords.reshape(-1) / (frame.cube_side / 2.0)


def pose3d_from_output(
    vec: np.ndarray, layout: JointLayout, frame: ReferenceFrame = DEFAULT_FRAME
) -> Pose3D:
    """Network output back to a hip-relative pose in millimetres."""
    coords = np.asarray(vec, dtype=np.float64).reshape(layout.K, 3) * (frame.cube_side / 2.0)
    return Pose3D(coords, np.ones(layout.K, dtype=bool))


def build_lifting_arrays(
    records: list[PoseRecord],
    layout: JointLayout,
    masks: list[OcclusionMask] | None = None,
    frame: ReferenceFrame = DEFAULT_FRAME,
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked (inputs 2K, targets 3K) arrays for the lifter, with optional occlusion."""
    xs, ys = [], []
    for i, rec in enumerate(records):
        pose = record_normalized_pose2d(rec, frame)
        if masks is not None:
            pose = apply_occlusion(pose, masks[i])
        xs.append(input_vec_2d(pose, frame))
        ys.append(target_vec_3d(rec, layout, frame))
    return np.stack(xs), np.stack(ys)


def build_2d_inputs(
    records: list[PoseRecord],
    masks: list[OcclusionMask] | None = None,
    frame: ReferenceFrame = DEFAULT_FRAME,
) -> np.ndarray:
    xs = []
    for i, rec in enumerate(records):
        pose = record_normalized_pose2d(rec, frame)
        if masks is not None:
            pose = apply_occlusion(pose, masks[i])
        xs.append(input_vec_2d(pose, frame))
    return np.stack(xs)
