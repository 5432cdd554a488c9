"""Gaussian joint-heatmap codec and the matching per-joint squared loss.

Each joint channel is an un-truncated 2d Gaussian of amplitude 1/(2*pi*sigma^2)
centered on the joint pixel, evaluated at integer pixel coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .pose import Pose2D


@dataclass
class HeatmapStack:
    """W x H x K stack of per-joint confidence maps."""

    data: np.ndarray  # (H, W, K)
    sigma: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ShapeError(f"heatmap stack must be 3d, got shape {self.data.shape}")
        if self.sigma <= 0:
            raise ParameterError("sigma must be positive")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def K(self) -> int:
        return self.data.shape[2]

    @property
    def amplitude(self) -> float:
        return 1.0 / (2.0 * np.pi * self.sigma**2)


def encode_heatmaps(pose: Pose2D, W: int = 64, H: int = 64, sigma: float = 4.0) -> HeatmapStack:
    """Render one Gaussian channel per visible joint; invisible joints give zeros."""
    if W <= 0 or H <= 0:
        raise ParameterError("heatmap dimensions must be positive")
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    xs = np.arange(W, dtype=np.float64)
    ys = np.arange(H, dtype=np.float64)
    data = np.zeros((H, W, pose.K), dtype=np.float64)
    amp = 1.0 / (2.0 * np.pi * sigma**2)
    inv = 1.0 / (2.0 * sigma**2)
    for k in range(pose.K):
        if not pose.visibility[k]:
            continue
        xk, yk = pose.coords[k]
        gx = np.exp(-((xs - xk) ** 2) * inv)
        gy = np.exp(-((ys - yk) ** 2) * inv)
        data[:, :, k] = amp * np.outer(gy, gx)
    return HeatmapStack(data, sigma)


def decode_heatmaps(stack: HeatmapStack) -> Pose2D:
    """Per-channel argmax decode; peak value rescaled by 2*pi*sigma^2 gives confidence."""
    K = stack.K
    coords = np.zeros((K, 2))
    vis = np.zeros(K, dtype=bool)
    conf = np.zeros(K)
    for k in range(K):
        chan = stack.data[:, :, k]
        peak = chan.max()
        if peak <= 0.0:
            continue
        iy, ix = np.unravel_index(int(chan.argmax()), chan.shape)
        coords[k] = (ix, iy)
        vis[k] = True
        conf[k] = min(peak / stack.amplitude, 1.0)
    return Pose2D(coords, vis, conf)


def heatmap_loss(pred: HeatmapStack, gt: HeatmapStack) -> float:
    """Mean over joints of the summed per-pixel squared difference."""
    if pred.data.shape != gt.data.shape:
        raise ShapeError(
            f"heatmap shape mismatch: {pred.data.shape} vs {gt.data.shape}"
        )
    diff = pred.data - gt.data
    return float(np.einsum("hwk,hwk->", diff, diff) / pred.K)
