import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sshfd.errors import ParameterError, ShapeError
from sshfd.ojr import (
    OcclusionMask,
    OjrConfig,
    PatternStream,
    apply_occlusion,
    sample_occlusion_pattern,
    training_pattern_stream,
)

from conftest import random_pose2d, random_pose3d


class TestPatternSampling:
    @given(m=st.integers(0, 16), seed=st.integers(0, 2**31))
    @settings(max_examples=60, deadline=None)
    def test_exact_cardinality(self, m, seed):
        mask = sample_occlusion_pattern(17, m, np.random.default_rng(seed))
        assert int((mask.v == 0).sum()) == m

    def test_reproducible_for_fixed_seed(self):
        a = sample_occlusion_pattern(17, 5, np.random.default_rng(9))
        b = sample_occlusion_pattern(17, 5, np.random.default_rng(9))
        assert np.array_equal(a.v, b.v)

    def test_protected_joint_never_dropped(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            mask = sample_occlusion_pattern(17, 16, rng, protect=11)
            assert mask.v[11] == 1

    def test_out_of_range_count_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ParameterError):
            sample_occlusion_pattern(17, 17, rng)
        with pytest.raises(ParameterError):
            sample_occlusion_pattern(17, -1, rng)

    def test_non_binary_mask_rejected(self):
        with pytest.raises(ParameterError):
            OcclusionMask(np.array([0, 1, 2]))


class TestApply:
    def test_masked_joints_zeroed(self, rng):
        pose = random_pose2d(rng, lo=10, hi=50)
        v = np.ones(17, dtype=np.uint8)
        v[[2, 9]] = 0
        out = apply_occlusion(pose, OcclusionMask(v))
        assert (out.coords[[2, 9]] == 0).all()
        assert not out.visibility[[2, 9]].any()
        assert (out.confidence[[2, 9]] == 0).all()

    def test_visible_joints_bitwise_unchanged(self, rng):
        pose = random_pose2d(rng)
        v = np.ones(17, dtype=np.uint8)
        v[4] = 0
        out = apply_occlusion(pose, OcclusionMask(v))
        keep = v.astype(bool)
        assert np.array_equal(out.coords[keep], pose.coords[keep])

    def test_original_pose_untouched(self, rng):
        pose = random_pose2d(rng, lo=10, hi=50)
        before = pose.coords.copy()
        apply_occlusion(pose, OcclusionMask(np.zeros(17, dtype=np.uint8)))
        assert np.array_equal(pose.coords, before)

    def test_works_on_3d_poses(self, rng):
        pose = random_pose3d(rng)
        v = np.ones(17, dtype=np.uint8)
        v[0] = 0
        out = apply_occlusion(pose, OcclusionMask(v))
        assert (out.coords[0] == 0).all()

    def test_idempotent(self, rng):
        pose = random_pose2d(rng)
        v = (rng.random(17) > 0.3).astype(np.uint8)
        mask = OcclusionMask(v)
        once = apply_occlusion(pose, mask)
        twice = apply_occlusion(once, mask)
        assert np.array_equal(once.coords, twice.coords)
        assert np.array_equal(once.visibility, twice.visibility)

    def test_length_mismatch_rejected(self, rng):
        with pytest.raises(ShapeError):
            apply_occlusion(random_pose2d(rng), OcclusionMask(np.ones(5, dtype=np.uint8)))


class TestStream:
    def test_disabled_stream_emits_all_visible(self):
        stream = PatternStream(OjrConfig(enabled=False), K=17)
        for mask in stream.take(20):
            assert (mask.v == 1).all()

    def test_same_seed_same_sequence(self):
        cfg = OjrConfig(seed=42)
        a = [m.v.tobytes() for m in PatternStream(cfg, 17).take(100)]
        b = [m.v.tobytes() for m in PatternStream(cfg, 17).take(100)]
        assert a == b

    def test_different_workers_differ(self):
        cfg = OjrConfig(seed=42)
        a = [m.v.tobytes() for m in PatternStream(cfg, 17, worker=0).take(50)]
        b = [m.v.tobytes() for m in PatternStream(cfg, 17, worker=1).take(50)]
        assert a != b

    def test_many_distinct_patterns(self):
        stream = PatternStream(OjrConfig(max_occluded=8, seed=0), K=17)
        stream.take(10000)
        assert stream.distinct_patterns >= 1000

    def test_count_frequencies_match_uniform(self):
        n = 18000
        cfg = OjrConfig(max_occluded=8, seed=3)
        counts = np.zeros(9, dtype=int)
        for mask in PatternStream(cfg, 17).take(n):
            counts[int((mask.v == 0).sum())] += 1
        p = 1.0 / 9
        sigma = np.sqrt(n * p * (1 - p))
        assert (np.abs(counts - n * p) < 3 * sigma).all()

    def test_custom_count_distribution_respected(self):
        dist = (0.5,) + tuple([0.5 / 8] * 8)
        cfg = OjrConfig(max_occluded=8, count_distribution=dist, seed=1)
        masks = PatternStream(cfg, 17).take(4000)
        frac_clean = np.mean([(m.v == 1).all() for m in masks])
        assert abs(frac_clean - 0.5) < 0.03

    def test_invalid_distribution_rejected(self):
        cfg = OjrConfig(max_occluded=8, count_distribution=(0.5, 0.5))
        with pytest.raises(ParameterError):
            cfg.probabilities()

    def test_max_occluded_must_be_below_joint_count(self):
        with pytest.raises(ParameterError):
            PatternStream(OjrConfig(max_occluded=17), K=17)

    def test_protect_hip_flag(self):
        cfg = OjrConfig(max_occluded=8, protect_hip=True, hip_index=11, seed=0)
        for mask in PatternStream(cfg, 17).take(500)[:500]:
            assert mask.v[11] == 1

    def test_convenience_wrapper_matches_stream(self):
        cfg = OjrConfig(seed=17)
        direct = [m.v.tobytes() for m in PatternStream(cfg, 17).take(30)]
        wrapped = [m.v.tobytes() for m in training_pattern_stream(cfg, 30)]
        assert direct == wrapped
