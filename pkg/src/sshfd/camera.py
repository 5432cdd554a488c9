"""Pinhole camera model: look-at orientation, projection, camera-frame coordinates.

World frame: +z up, millimetres. Camera frame: x right, y down (image
convention), z forward depth.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .pose import Pose2D, Pose3D

_WORLD_UP = np.array([0.0, 0.0, 1.0])


@dataclass
class Camera:
    position: np.ndarray  # (3,) mm
    target: np.ndarray  # (3,) mm, look-at point
    focal: float  # px
    principal: np.ndarray  # (2,) px
    image_size: tuple[int, int]  # (width, height) px

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.target = np.asarray(self.target, dtype=np.float64)
        self.principal = np.asarray(self.principal, dtype=np.float64)
        if np.allclose(self.position, self.target):
            raise ParameterError("camera position must differ from its target")
        if self.focal <= 0:
            raise ParameterError("focal length must be positive")

    def rotation(self) -> np.ndarray:
        """World->camera rotation, rows = (right, down, forward)."""
        fwd = self.target - self.position
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, _WORLD_UP)
        nr = np.linalg.norm(right)
        if nr < 1e-9:  # looking straight up/down: pick an arbitrary right axis
            right = np.array([1.0, 0.0, 0.0])
        else:
            right = right / nr
        down = np.cross(fwd, right)
        return np.stack([right, down, fwd])

    def to_dict(self) -> dict:
        return {
            "position": self.position.tolist(),
            "target": self.target.tolist(),
            "focal": self.focal,
            "principal": self.principal.tolist(),
            "image_size": list(self.image_size),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(
            position=np.array(d["position"]),
            target=np.array(d["target"]),
            focal=float(d["focal"]),
            principal=np.array(d["principal"]),
            image_size=(int(d["image_size"][0]), int(d["image_size"][1])),
        )


def world_to_camera(points: np.ndarray, cam: Camera) -> np.ndarray:
    """(N, 3) world points -> camera-frame coordinates."""
    return (np.asarray(points) - cam.position) @ cam.rotation().T


def project(pose: Pose3D, cam: Camera) -> Pose2D:
    """Pinhole projection; joints behind the camera or out of frame become invisible."""
    pts = world_to_camera(pose.coords, cam)
    K = pose.K
    coords = np.zeros((K, 2))
    vis = np.zeros(K, dtype=bool)
    w, h = cam.image_size
    for k in range(K):
        if not pose.visibility[k]:
            continue
        x, y, z = pts[k]
        if z <= 1e-6:
            continue
        u = cam.focal * x / z + cam.principal[0]
        v = cam.focal * y / z + cam.principal[1]
        if 0.0 <= u < w and 0.0 <= v < h:
            coords[k] = (u, v)
            vis[k] = True
    conf = vis.astype(np.float64)
    return Pose2D(coords, vis, conf)


def camera_frame_pose(pose: Pose3D, cam: Camera) -> Pose3D:
    """Re-express a world pose in camera-aligned axes (rotation only, no translation)."""
    coords = np.asarray(pose.coords) @ cam.rotation().T
    out = Pose3D(coords, pose.visibility.copy())
    return out
