import math

import numpy as np
import pytest

from sshfd.camera import Camera, camera_frame_pose, project, world_to_camera
from sshfd.errors import ParameterError
from sshfd.layout import COCO_LAYOUT
from sshfd.pose import Pose3D
from sshfd.synthgen import (
    DEFAULT_BONES,
    DEFAULT_CLASS_MIX,
    POSE_CLASSES,
    CameraBounds,
    GeneratorConfig,
    PoseClassSpec,
    SkeletonTemplate,
    generate_dataset,
    generate_record,
    sample_skeleton,
    torso_inclination_deg,
)

TEMPLATE = SkeletonTemplate()
HIP = COCO_LAYOUT.hip_index


def skeletons(cls_name, n, seed=0):
    rng = np.random.default_rng(seed)
    spec = POSE_CLASSES[cls_name]
    return [sample_skeleton(spec, TEMPLATE, rng)[0] for _ in range(n)]


class TestCamera:
    def test_point_on_axis_projects_to_principal_point(self):
        cam = Camera(
            position=np.array([0.0, 0.0, 1000.0]),
            target=np.array([0.0, 0.0, 0.0]),
            focal=400.0,
            principal=np.array([320.0, 240.0]),
            image_size=(640, 480),
        )
        coords = np.tile([[0.0, 0.0, 0.0]], (17, 1))
        pose = Pose3D(coords, np.ones(17, dtype=bool))
        out = project(pose, cam)
        assert np.allclose(out.coords[0], (320.0, 240.0))

    def test_pixel_offset_scales_linearly_with_focal(self):
        def shot(focal):
            cam = Camera(
                position=np.array([0.0, -2000.0, 0.0]),
                target=np.zeros(3),
                focal=focal,
                principal=np.array([320.0, 240.0]),
                image_size=(640, 480),
            )
            coords = np.tile([[100.0, 0.0, 0.0]], (17, 1))
            return project(Pose3D(coords, np.ones(17, dtype=bool)), cam).coords[0]

        a = shot(300.0) - np.array([320.0, 240.0])
        b = shot(600.0) - np.array([320.0, 240.0])
        assert np.allclose(b, 2.0 * a, atol=1e-9)

    def test_rotation_is_orthonormal(self, rng):
        cam = Camera(
            position=rng.normal(0, 1000, 3) + np.array([0.0, 0.0, 3000.0]),
            target=rng.normal(0, 100, 3),
            focal=400.0,
            principal=np.array([320.0, 240.0]),
            image_size=(640, 480),
        )
        R = cam.rotation()
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    def test_projection_consistent_with_manual_pinhole(self, rng):
        cam = Camera(
            position=np.array([2500.0, 1500.0, 1800.0]),
            target=np.array([0.0, 0.0, 800.0]),
            focal=450.0,
            principal=np.array([320.0, 240.0]),
            image_size=(640, 480),
        )
        coords = rng.normal(0.0, 300.0, (17, 3)) + np.array([0.0, 0.0, 800.0])
        pose = Pose3D(coords, np.ones(17, dtype=bool))
        out = project(pose, cam)
        cpts = world_to_camera(coords, cam)
        for k in range(17):
            if not out.visibility[k]:
                continue
            x, y, z = cpts[k]
            assert out.coords[k][0] == pytest.approx(450.0 * x / z + 320.0, rel=1e-12)
            assert out.coords[k][1] == pytest.approx(450.0 * y / z + 240.0, rel=1e-12)

    def test_points_behind_camera_invisible(self):
        cam = Camera(
            position=np.zeros(3) + np.array([0.0, -1000.0, 0.0]),
            target=np.array([0.0, 1.0, 0.0]),
            focal=400.0,
            principal=np.array([320.0, 240.0]),
            image_size=(640, 480),
        )
        coords = np.tile([[0.0, -5000.0, 0.0]], (17, 1))
        out = project(Pose3D(coords, np.ones(17, dtype=bool)), cam)
        assert not out.visibility.any()

    def test_camera_frame_pose_preserves_distances(self, rng):
        cam = Camera(
            position=np.array([1000.0, 2000.0, 1500.0]),
            target=np.zeros(3),
            focal=400.0,
            principal=np.array([320.0, 240.0]),
            image_size=(640, 480),
        )
        coords = rng.normal(0, 400, (17, 3))
        pose = Pose3D(coords, np.ones(17, dtype=bool))
        out = camera_frame_pose(pose, cam)
        d0 = np.linalg.norm(coords[:, None] - coords[None], axis=-1)
        d1 = np.linalg.norm(out.coords[:, None] - out.coords[None], axis=-1)
        assert np.allclose(d0, d1, atol=1e-9)

    def test_degenerate_camera_rejected(self):
        with pytest.raises(ParameterError):
            Camera(np.zeros(3), np.zeros(3), 400.0, np.zeros(2), (640, 480))

    def test_dict_roundtrip(self):
        cam = Camera(
            position=np.array([1.0, 2.0, 3.0]),
            target=np.zeros(3),
            focal=432.5,
            principal=np.array([320.0, 240.0]),
            image_size=(640, 480),
        )
        back = Camera.from_dict(cam.to_dict())
        assert np.array_equal(back.position, cam.position)
        assert back.focal == cam.focal
        assert back.image_size == cam.image_size


class TestSkeleton:
    def test_bone_lengths_match_template_up_to_jitter(self):
        rng = np.random.default_rng(5)
        spec = POSE_CLASSES["stand"]
        pose, _ = sample_skeleton(spec, TEMPLATE, rng, bone_jitter=0.0)
        for parent, child, length in DEFAULT_BONES:
            p = pose.coords[COCO_LAYOUT.index(parent)]
            c = pose.coords[COCO_LAYOUT.index(child)]
            assert np.linalg.norm(c - p) == pytest.approx(length, rel=1e-6), child

    def test_jittered_lengths_within_bounds(self):
        rng = np.random.default_rng(6)
        spec = POSE_CLASSES["walk"]
        for _ in range(20):
            pose, _ = sample_skeleton(spec, TEMPLATE, rng, bone_jitter=0.1)
            for parent, child, length in DEFAULT_BONES:
                p = pose.coords[COCO_LAYOUT.index(parent)]
                c = pose.coords[COCO_LAYOUT.index(child)]
                got = np.linalg.norm(c - p)
                assert 0.9 * length - 1e-6 <= got <= 1.1 * length + 1e-6

    def test_standing_pose_is_tall(self):
        # independent geometric oracle: an upright skeleton has the nose far
        # above the hips along the world vertical
        for pose in skeletons("stand", 50):
            dz = pose.coords[COCO_LAYOUT.index("nose"), 2] - pose.coords[HIP, 2]
            assert dz > 400.0

    def test_prone_fall_pose_is_flat(self):
        for pose in skeletons("fall-prone", 200, seed=1):
            assert pose.coords[:, 2].max() <= 350.0

    def test_inclination_recoverable_per_class(self):
        for name, spec in POSE_CLASSES.items():
            rng = np.random.default_rng(hash(name) % 2**31)
            lo, hi = spec.torso_incl_deg
            for _ in range(30):
                pose, _ = sample_skeleton(spec, TEMPLATE, rng)
                incl = torso_inclination_deg(pose)
                assert lo - 1e-6 <= incl <= hi + 1e-6, name

    def test_all_joints_above_ground(self):
        for name in POSE_CLASSES:
            for pose in skeletons(name, 20, seed=3):
                assert pose.coords[:, 2].min() >= 10.0 - 1e-9

    def test_labels_match_class(self):
        rng = np.random.default_rng(0)
        for name, spec in POSE_CLASSES.items():
            _, label = sample_skeleton(spec, TEMPLATE, rng)
            assert label == spec.label

    def test_class_validation(self):
        with pytest.raises(ParameterError):
            PoseClassSpec("bad-fall", (30, 90), (0, 10), (0, 10), 10, 5, "fall")
        with pytest.raises(ParameterError):
            PoseClassSpec("bad-nofall", (0, 80), (0, 10), (0, 10), 10, 5, "no_fall")

    def test_incomplete_bone_tree_rejected(self):
        with pytest.raises(ParameterError):
            SkeletonTemplate(bones=DEFAULT_BONES[:-1])


class TestGenerator:
    def test_dataset_determinism_byte_identical(self, tmp_path):
        from sshfd.data import write_jsonl

        a = generate_dataset(40, seed=9)
        b = generate_dataset(40, seed=9)
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_jsonl(a, pa)
        write_jsonl(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_record_determinism_is_per_index(self):
        cfg = GeneratorConfig()
        r5 = generate_record(5, seed=11, config=cfg, template=TEMPLATE)
        again = generate_record(5, seed=11, config=cfg, template=TEMPLATE)
        assert np.array_equal(r5.joints3d.coords, again.joints3d.coords)
        other = generate_record(6, seed=11, config=cfg, template=TEMPLATE)
        assert not np.array_equal(r5.joints3d.coords, other.joints3d.coords)

    def test_stored_2d_is_exact_reprojection(self):
        ds = generate_dataset(60, seed=21)
        for rec in ds.records:
            redo = project(rec.joints3d, rec.camera)
            vis = rec.joints2d.visibility
            assert np.array_equal(vis, redo.visibility)
            assert np.allclose(rec.joints2d.coords[vis], redo.coords[vis], atol=1e-9)

    def test_hip_always_visible_and_enough_joints(self):
        ds = generate_dataset(120, seed=2)
        for rec in ds.records:
            assert rec.joints2d.visibility[HIP]
            assert int(rec.joints2d.visibility.sum()) >= 12

    def test_class_counts_match_mix(self):
        n = 3000
        ds = generate_dataset(n, seed=4)
        counts = {}
        for rec in ds.records:
            counts[rec.class_name] = counts.get(rec.class_name, 0) + 1
        for name, p in DEFAULT_CLASS_MIX.items():
            sigma = math.sqrt(n * p * (1 - p))
            assert abs(counts.get(name, 0) - n * p) < 3 * sigma, name

    def test_roughly_balanced_fall_labels(self):
        ds = generate_dataset(2000, seed=8)
        frac_fall = np.mean([r.label == "fall" for r in ds.records])
        assert 0.45 < frac_fall < 0.55

    def test_fall_labels_consistent_with_inclination(self):
        ds = generate_dataset(300, seed=13)
        for rec in ds.records:
            incl = torso_inclination_deg(rec.joints3d)
            if rec.label == "fall":
                assert incl >= 60.0 - 1e-6
            else:
                assert incl <= 45.0 + 1e-6

    def test_custom_camera_bounds_respected(self):
        cfg = GeneratorConfig(camera=CameraBounds(distance_mm=(2000.0, 2500.0)))
        ds = generate_dataset(50, seed=6, config=cfg)
        for rec in ds.records:
            centroid = rec.joints3d.coords.mean(axis=0)
            dist = np.linalg.norm(rec.camera.position - centroid)
            assert 1900.0 < dist < 2600.0

    def test_bad_mix_rejected(self):
        cfg = GeneratorConfig(class_mix={"stand": 0.5})
        with pytest.raises(ParameterError):
            generate_dataset(5, seed=0, config=cfg)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ParameterError):
            generate_dataset(0, seed=0)
