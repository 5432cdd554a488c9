"""Pose-based single-shot fall detection pipeline.

Submodules: pose/heatmap (representation and codec), engine (dense MLP
compute + autodiff), posenet3d (2d->3d lifting), fallnet (fusion classifier),
ojr (occlusion augmentation), synthgen (synthetic data), evalharness
(metrics and robustness sweeps), cli (command-line entry point).
"""

__version__ = "0.1.0"
