"""Joint layout definition for the 17-keypoint skeleton."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParameterError

COCO_JOINT_NAMES = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)


@dataclass(frozen=True)
class JointLayout:
    """Ordered joint names plus the index of the root (hip) joint."""

    names: tuple[str, ...] = COCO_JOINT_NAMES
    hip_index: int = 11  # left_hip, used as the skeleton root

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ParameterError("joint names must be unique")
        if not 0 <= self.hip_index < len(self.names):
            raise ParameterError("hip_index out of range")

    @property
    def K(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


COCO_LAYOUT = JointLayout()


@dataclass(frozen=True)
class ReferenceFrame:
    """Fixed 2d reference image and 3d working volume the pipeline normalizes into."""

    width: int = 224
    height: int = 224
    cube_side: float = 1000.0  # mm

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.cube_side <= 0:
            raise ParameterError("reference frame dimensions must be positive")


DEFAULT_FRAME = ReferenceFrame()
