"""Random per-joint occlusion patterns for occlusion-resilient training.

A pattern is a binary visibility vector multiplied into the pose: masked
joints get zeroed coordinates and visibility=False, exactly the convention
the rest of the pipeline uses for joints that were never observed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

from .errors import ParameterError, ShapeError
from .pose import Pose2D, Pose3D


@dataclass(frozen=True)
class OcclusionMask:
    v: np.ndarray  # (K,) uint8 in {0, 1}

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=np.uint8))
        if not np.isin(self.v, (0, 1)).all():
            raise ParameterError("mask entries must be 0 or 1")

    @property
    def K(self) -> int:
        return self.v.shape[0]


@dataclass
class OjrConfig:
    enabled: bool = True
    max_occluded: int = 8
    # probability of occluding exactly m joints, m = 0..max_occluded;
    # None means uniform
    count_distribution: tuple[float, ...] | None = None
    protect_hip: bool = False
    hip_index: int = 11
    seed: int = 0

    def probabilities(self) -> np.ndarray:
        n = self.max_occluded + 1
        if self.count_distribution is None:
            return np.full(n, 1.0 / n)
        p = np.asarray(self.count_distribution, dtype=np.float64)
        if p.shape != (n,) or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ParameterError("count_distribution must be a length max_occluded+1 simplex")
        return p


def sample_occlusion_pattern(
    K: int, m: int, rng: np.random.Generator, protect: int | None = None
) -> OcclusionMask:
    """Mask with exactly ``m`` zeros placed uniformly among eligible joints."""
    if not 0 <= m < K:
        raise ParameterError(f"occlusion count m={m} must lie in [0, K)")
    eligible = np.arange(K)
    if protect is not None:
        eligible = eligible[eligible != protect]
    if m > eligible.size:
        raise ParameterError("more occlusions requested than eligible joints")
    v = np.ones(K, dtype=np.uint8)
    drop = rng.choice(eligible, size=m, replace=False)
    v[drop] = 0
    return OcclusionMask(v)


def apply_occlusion(pose: Union[Pose2D, Pose3D], mask: OcclusionMask):
    """Zero out masked joints; untouched joints are copied bitwise."""
    if mask.K != pose.K:
        raise ShapeError(f"mask length {mask.K} != joint count {pose.K}")
    out = pose.copy()
    hidden = mask.v == 0
    out.coords[hidden] = 0.0
    out.visibility[hidden] = False
    if isinstance(out, Pose2D):
        out.confidence[hidden] = 0.0
    return out


class PatternStream:
    """Per-sample occlusion pattern source with a private seeded RNG.

    Draws the occlusion count from the configured distribution, then a
    uniform pattern of that cardinality. Tracks how many distinct patterns
    have been emitted.
    """

    def __init__(self, cfg: OjrConfig, K: int, worker: int = 0):
        if cfg.max_occluded >= K:
            raise ParameterError("max_occluded must be < K")
        self.cfg = cfg
        self.K = K
        self.rng = np.random.default_rng([cfg.seed, worker])
        self._seen: set[bytes] = set()
        self.emitted = 0

    def next(self) -> OcclusionMask:
        if not self.cfg.enabled:
            mask = OcclusionMask(np.ones(self.K, dtype=np.uint8))
        else:
            probs = self.cfg.probabilities()
            m = int(self.rng.choice(probs.size, p=probs))
            protect = self.cfg.hip_index if self.cfg.protect_hip else None
            mask = sample_occlusion_pattern(self.K, m, self.rng, protect=protect)
        self.emitted += 1
        self._seen.add(mask.v.tobytes())
        return mask

    @property
    def distinct_patterns(self) -> int:
        return len(self._seen)

    def take(self, n: int) -> list[OcclusionMask]:
        return [self.next() for _ in range(n)]


def training_pattern_stream(cfg: OjrConfig, n_samples: int, K: int = 17) -> list[OcclusionMask]:
    """Materialize ``n_samples`` patterns from a fresh stream (convenience wrapper)."""
    return PatternStream(cfg, K).take(n_samples)
