"""Procedural generator of geometrically consistent (2d, 3d, label) pose records.

A skeleton template (bone tree rooted at the left hip) is posed per class by
choosing a torso inclination from vertical plus limb flexion angles, then
yawed, dropped onto the ground plane, and photographed by a randomized orbit
camera. The stored 2d pose is the exact pinhole projection of the stored 3d
pose, so every record is reprojection-consistent by construction.

Fall classes keep torso inclination >= 60 degrees from vertical and no-fall
classes stay <= 45 degrees, which makes the labels separable by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import Camera, project
from .data import PoseDataset, PoseRecord
from .errors import ParameterError
from .layout import COCO_LAYOUT, JointLayout
from .pose import Pose3D

# (parent, child, mean length mm); tree rooted at left_hip
DEFAULT_BONES = (
    ("left_hip", "right_hip", 240.0),
    ("left_hip", "left_knee", 440.0),
    ("left_knee", "left_ankle", 430.0),
    ("right_hip", "right_knee", 440.0),
    ("right_knee", "right_ankle", 430.0),
    ("left_hip", "left_shoulder", 500.0),
    ("left_shoulder", "right_shoulder", 360.0),
    ("left_shoulder", "left_elbow", 280.0),
    ("left_elbow", "left_wrist", 250.0),
    ("right_shoulder", "right_elbow", 280.0),
    ("right_elbow", "right_wrist", 250.0),
    ("left_shoulder", "nose", 300.0),
    ("nose", "left_eye", 60.0),
    ("nose", "right_eye", 60.0),
    ("left_eye", "left_ear", 90.0),
    ("right_eye", "right_ear", 90.0),
)


@dataclass(frozen=True)
class SkeletonTemplate:
    bones: tuple[tuple[str, str, float], ...] = DEFAULT_BONES
    layout: JointLayout = COCO_LAYOUT

    def __post_init__(self):
        children = [c for _, c, _ in self.bones]
        if len(set(children)) != len(children):
            raise ParameterError("bone tree must reach each joint once")
        root = self.layout.names[self.layout.hip_index]
        reached = {root} | set(children)
        if reached != set(self.layout.names):
            raise ParameterError("bone tree must span all joints from the hip root")
        if any(length <= 0 for _, _, length in self.bones):
            raise ParameterError("bone lengths must be positive")

    def length(self, child: str) -> float:
        for _, c, length in self.bones:
            if c == child:
                return length
        raise KeyError(child)


@dataclass(frozen=True)
class PoseClassSpec:
    name: str
    torso_incl_deg: tuple[float, float]  # from vertical
    hip_flexion_deg: tuple[float, float]
    knee_flexion_deg: tuple[float, float]
    arm_cone_deg: float
    limb_jitter_deg: float
    label: str

    def __post_init__(self):
        lo, hi = self.torso_incl_deg
        if self.label == "fall" and lo < 60:
            raise ParameterError(f"{self.name}: fall classes need inclination >= 60")
        if self.label == "no_fall" and hi > 45:
            raise ParameterError(f"{self.name}: no-fall classes need inclination <= 45")


POSE_CLASSES = {
    "stand": PoseClassSpec("stand", (0, 15), (0, 15), (0, 10), 15, 5, "no_fall"),
    "walk": PoseClassSpec("walk", (0, 20), (5, 45), (5, 45), 25, 8, "no_fall"),
    "sit": PoseClassSpec("sit", (10, 40), (70, 100), (70, 100), 25, 8, "no_fall"),
    "crouch": PoseClassSpec("crouch", (20, 45), (90, 130), (90, 140), 25, 8, "no_fall"),
    "fall-supine": PoseClassSpec("fall-supine", (60, 90), (0, 30), (0, 30), 20, 8, "fall"),
    "fall-prone": PoseClassSpec("fall-prone", (85, 90), (0, 10), (0, 10), 10, 4, "fall"),
    "fall-side": PoseClassSpec("fall-side", (60, 85), (10, 50), (10, 60), 20, 8, "fall"),
}

DEFAULT_CLASS_MIX = {
    "stand": 0.15,
    "walk": 0.15,
    "sit": 0.10,
    "crouch": 0.10,
    "fall-supine": 1 / 6,
    "fall-prone": 1 / 6,
    "fall-side": 1 / 6,
}


@dataclass
class CameraBounds:
    elevation_deg: tuple[float, float] = (10.0, 60.0)
    distance_mm: tuple[float, float] = (2000.0, 6000.0)
    focal_px: tuple[float, float] = (300.0, 500.0)
    image_size: tuple[int, int] = (640, 480)


@dataclass
class GeneratorConfig:
    class_mix: dict = field(default_factory=lambda: dict(DEFAULT_CLASS_MIX))
    camera: CameraBounds = field(default_factory=CameraBounds)
    bone_jitter: float = 0.1  # relative length jitter per sample
    min_visible_joints: int = 12

    def mix_items(self):
        items = sorted(self.class_mix.items())
        total = sum(p for _, p in items)
        if abs(total - 1.0) > 1e-6:
            raise ParameterError("class mix must sum to 1")
        return items


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _jitter(d: np.ndarray, cone_deg: float, rng) -> np.ndarray:
    if cone_deg <= 0:
        return _unit(d)
    return _unit(_unit(d) + rng.normal(0.0, math.sin(math.radians(cone_deg)) / 2.0, 3))


def torso_inclination_deg(pose: Pose3D, layout: JointLayout = COCO_LAYOUT) -> float:
    """Angle of the left_hip -> left_shoulder axis from the world vertical."""
    hip = pose.coords[layout.index("left_hip")]
    sho = pose.coords[layout.index("left_shoulder")]
    t = _unit(sho - hip)
    return math.degrees(math.acos(np.clip(t[2], -1.0, 1.0)))


def sample_skeleton(
    spec: PoseClassSpec,
    template: SkeletonTemplate,
    rng: np.random.Generator,
    bone_jitter: float = 0.1,
) -> tuple[Pose3D, str]:
    """Pose the bone tree for one sample; returns a world-frame pose and its label."""
    layout = template.layout
    scale = 1.0 + rng.uniform(-bone_jitter, bone_jitter)

    def blen(child):
        return template.length(child) * scale

    theta = math.radians(rng.uniform(*spec.torso_incl_deg))
    phi = rng.uniform(0.0, 2 * math.pi)
    t = np.array(
        [math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]
    )
    l = np.array([math.cos(phi + math.pi / 2), math.sin(phi + math.pi / 2), 0.0])
    f = np.cross(t, l)

    J: dict[str, np.ndarray] = {}
    J["left_hip"] = np.zeros(3)
    J["right_hip"] = J["left_hip"] - blen("right_hip") * _jitter(l, spec.limb_jitter_deg, rng)
    J["left_shoulder"] = J["left_hip"] + blen("left_shoulder") * t  # exact torso axis
    J["right_shoulder"] = J["left_shoulder"] - blen("right_shoulder") * _jitter(
        l, spec.limb_jitter_deg, rng
    )
    mid_sh = 0.5 * (J["left_shoulder"] + J["right_shoulder"])
    head_target = mid_sh + 250.0 * _jitter(t, spec.limb_jitter_deg, rng)
    J["nose"] = J["left_shoulder"] + blen("nose") * _unit(head_target - J["left_shoulder"])
    up_h = _unit(J["nose"] - mid_sh)
    J["left_eye"] = J["nose"] + blen("left_eye") * _unit(l + 0.5 * up_h)
    J["right_eye"] = J["nose"] + blen("right_eye") * _unit(-l + 0.5 * up_h)
    J["left_ear"] = J["left_eye"] + blen("left_ear") * _unit(l - 0.3 * f)
    J["right_ear"] = J["right_eye"] + blen("right_ear") * _unit(-l - 0.3 * f)

    for side, lat in (("left", 1.0), ("right", -1.0)):
        a = math.radians(rng.uniform(*spec.hip_flexion_deg))
        b = math.radians(rng.uniform(*spec.knee_flexion_deg))
        thigh_dir = _jitter(math.cos(a) * -t + math.sin(a) * f, spec.limb_jitter_deg, rng)
        shin_dir = _jitter(
            math.cos(a - b) * -t + math.sin(a - b) * f, spec.limb_jitter_deg, rng
        )
        J[f"{side}_knee"] = J[f"{side}_hip"] + blen(f"{side}_knee") * thigh_dir
        J[f"{side}_ankle"] = J[f"{side}_knee"] + blen(f"{side}_ankle") * shin_dir
        arm_dir = _jitter(-t + 0.3 * lat * l, spec.arm_cone_deg, rng)
        J[f"{side}_elbow"] = J[f"{side}_shoulder"] + blen(f"{side}_elbow") * arm_dir
        J[f"{side}_wrist"] = J[f"{side}_elbow"] + blen(f"{side}_wrist") * _jitter(
            arm_dir, spec.arm_cone_deg, rng
        )

    coords = np.stack([J[name] for name in layout.names])
    coords[:, 0] += rng.uniform(-800.0, 800.0)
    coords[:, 1] += rng.uniform(-800.0, 800.0)
    clearance = rng.uniform(10.0, 50.0)
    coords[:, 2] += clearance - coords[:, 2].min()
    return Pose3D(coords, np.ones(layout.K, dtype=bool)), spec.label


def sample_camera(rng: np.random.Generator, centroid: np.ndarray, bounds: CameraBounds) -> Camera:
    """Randomized orbit camera looking at the subject centroid."""
    elev = math.radians(rng.uniform(*bounds.elevation_deg))
    azim = rng.uniform(0.0, 2 * math.pi)
    dist = rng.uniform(*bounds.distance_mm)
    offset = dist * np.array(
        [math.cos(elev) * math.cos(azim), math.cos(elev) * math.sin(azim), math.sin(elev)]
    )
    w, h = bounds.image_size
    return Camera(
        position=np.asarray(centroid) + offset,
        target=np.asarray(centroid),
        focal=rng.uniform(*bounds.focal_px),
        principal=np.array([w / 2.0, h / 2.0]),
        image_size=(w, h),
    )


def generate_record(
    index: int, seed: int, config: GeneratorConfig, template: SkeletonTemplate
) -> PoseRecord:
    """Deterministic per-(seed, index) record generation."""
    rng = np.random.default_rng([seed, index])
    items = config.mix_items()
    probs = np.array([p for _, p in items])
    cls_name = items[int(rng.choice(len(items), p=probs / probs.sum()))][0]
    spec = POSE_CLASSES[cls_name]
    pose3d, label = sample_skeleton(spec, template, rng, config.bone_jitter)
    hip_name = template.layout.names[template.layout.hip_index]
    # retry the camera until the hip is on frame and enough joints are visible
    for _ in range(50):
        cam = sample_camera(rng, pose3d.coords.mean(axis=0), config.camera)
        pose2d = project(pose3d, cam)
        if (
            pose2d.visibility[template.layout.index(hip_name)]
            and int(pose2d.visibility.sum()) >= config.min_visible_joints
        ):
            break
    return PoseRecord(
        id=f"r{index:06d}",
        joints2d=pose2d,
        joints3d=pose3d,
        label=label,
        class_name=cls_name,
        camera=cam,
    )


def generate_dataset(
    n: int,
    seed: int,
    config: GeneratorConfig | None = None,
    template: SkeletonTemplate | None = None,
) -> PoseDataset:
    if n <= 0:
        raise ParameterError("dataset size must be positive")
    config = config or GeneratorConfig()
    template = template or SkeletonTemplate()
    records = [generate_record(i, seed, config, template) for i in range(n)]
    return PoseDataset(records, template.layout, source=f"synthgen(seed={seed}, n={n})")
