"""2d/3d pose containers and normalization into the fixed reference frame.

Invisible joints always carry coordinates (0, 0) / (0, 0, 0) so that masking a
joint and "the joint was never seen" are the same representation downstream.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, MissingRootError, ShapeError
from .layout import DEFAULT_FRAME, JointLayout, ReferenceFrame


@dataclass
class Pose2D:
    """K joints in pixel space with per-joint visibility and confidence."""

    coords: np.ndarray  # (K, 2) float64
    visibility: np.ndarray  # (K,) bool
    confidence: np.ndarray  # (K,) float64 in [0, 1]

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.visibility = np.asarray(self.visibility, dtype=bool)
        self.confidence = np.asarray(self.confidence, dtype=np.float64)
        k = self.coords.shape[0]
        if self.coords.shape != (k, 2):
            raise ShapeError(f"coords must be (K, 2), got {self.coords.shape}")
        if self.visibility.shape != (k,) or self.confidence.shape != (k,):
            raise ShapeError("visibility/confidence length must match joint count")
        self.coords[~self.visibility] = 0.0
        self.confidence[~self.visibility] = 0.0

    @property
    def K(self) -> int:
        return self.coords.shape[0]

    @classmethod
    def empty(cls, K: int) -> "Pose2D":
        return cls(np.zeros((K, 2)), np.zeros(K, dtype=bool), np.zeros(K))

    def copy(self) -> "Pose2D":
        return Pose2D(self.coords.copy(), self.visibility.copy(), self.confidence.copy())

    def flat(self) -> np.ndarray:
        """Row-major (x1, y1, ..., xK, yK) vector of length 2K."""
        return self.coords.reshape(-1).copy()


@dataclass
class Pose3D:
    """K joints in millimetres with per-joint visibility."""

    coords: np.ndarray  # (K, 3) float64
    visibility: np.ndarray  # (K,) bool

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.visibility = np.asarray(self.visibility, dtype=bool)
        k = self.coords.shape[0]
        if self.coords.shape != (k, 3):
            raise ShapeError(f"coords must be (K, 3), got {self.coords.shape}")
        if self.visibility.shape != (k,):
            raise ShapeError("visibility length must match joint count")
        self.coords[~self.visibility] = 0.0

    @property
    def K(self) -> int:
        return self.coords.shape[0]

    def copy(self) -> "Pose3D":
        return Pose3D(self.coords.copy(), self.visibility.copy())

    def flat(self) -> np.ndarray:
        return self.coords.reshape(-1).copy()


def normalize_pose2d(
    raw: Pose2D,
    bbox: tuple[float, float, float, float],
    frame: ReferenceFrame = DEFAULT_FRAME,
) -> Pose2D:
    """Map joints from a source bounding box onto the fixed reference image.

    ``bbox`` is (x0, y0, x1, y1) in source pixels. The mapping is the affine
    transform sending the box corners to the reference-frame corners
    (anisotropic; aspect ratio is not preserved). Invisible joints stay (0, 0).
    """
    x0, y0, x1, y1 = bbox
    if not (x1 > x0 and y1 > y0) or not np.isfinite([x0, y0, x1, y1]).all():
        raise DegenerateGeometryError(f"degenerate bbox {bbox!r}")
    out = raw.copy()
    sx = frame.width / (x1 - x0)
    sy = frame.height / (y1 - y0)
    vis = out.visibility
    out.coords[vis, 0] = (out.coords[vis, 0] - x0) * sx
    out.coords[vis, 1] = (out.coords[vis, 1] - y0) * sy
    return out


def normalize_pose3d(raw: Pose3D, layout: JointLayout) -> Pose3D:
    """Translate a 3d pose so the hip joint sits exactly at the origin."""
    hip = layout.hip_index
    if not raw.visibility[hip] or not np.isfinite(raw.coords[hip]).all():
        raise MissingRootError("hip joint is not visible; cannot hip-center the pose")
    out = raw.copy()
    root = out.coords[hip].copy()
    out.coords[out.visibility] -= root
    out.coords[hip] = 0.0  # exact zero, no residual rounding
    return out


def tight_bbox(pose: Pose2D, pad_frac: float = 0.1) -> tuple[float, float, float, float]:
    """Axis-aligned box around the visible joints, padded by ``pad_frac`` per side."""
    if not pose.visibility.any():
        raise DegenerateGeometryError("no visible joints to derive a bbox from")
    pts = pose.coords[pose.visibility]
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    w = max(x1 - x0, 1e-6)
    h = max(y1 - y0, 1e-6)
    return (x0 - pad_frac * w, y0 - pad_frac * h, x1 + pad_frac * w, y1 + pad_frac * h)
