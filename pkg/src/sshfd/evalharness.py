"""Classification metrics and the occlusion-robustness sweep protocol.

Weighted precision/recall/F1 weight each per-class metric by its true-class
support. Zero-denominator convention: a class with no predicted positives has
precision 0; a class with no true samples has recall 0 (documented in the
emitted report header).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .data import LABELS, PoseDataset, PoseRecord
from .engine import MlpModel
from .errors import ParameterError, ShapeError
from .fallnet import FallNetModel, classify_batch, fallnet_inputs
from .layout import COCO_LAYOUT, DEFAULT_FRAME, JointLayout, ReferenceFrame
from .ojr import sample_occlusion_pattern
from .posenet3d import evaluate_mpjpe


@dataclass
class ClassReport:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class ClassificationReport:
    per_class: dict[int, ClassReport]
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    confusion: np.ndarray  # (n_classes, n_classes), rows = true class
    n_samples: int


def weighted_prf(preds, gts, n_classes: int | None = None) -> ClassificationReport:
    """Per-class and support-weighted precision/recall/F1 from confusion counts."""
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    gts = np.asarray(gts, dtype=np.int64).reshape(-1)
    if preds.shape != gts.shape:
        raise ShapeError("prediction/label length mismatch")
    if preds.size == 0:
        raise ParameterError("cannot score an empty label set")
    if n_classes is None:
        n_classes = int(max(preds.max(), gts.max())) + 1
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (gts, preds), 1)
    per_class = {}
    w_p = w_r = w_f = 0.0
    for c in range(n_classes):
        tp = conf[c, c]
        support = int(conf[c].sum())
        predicted = int(conf[:, c].sum())
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[c] = ClassReport(precision, recall, f1, support)
        w_p += support * precision
        w_r += support * recall
        w_f += support * f1
    n = preds.size
    return ClassificationReport(per_class, w_p / n, w_r / n, w_f / n, conf, n)


@dataclass
class SweepRow:
    m: int
    variant: str
    metric: str
    value: float
    seed: int
    dataset_id: str


@dataclass
class SweepResult:
    rows: list[SweepRow]

    def value(self, m: int, variant: str) -> float:
        for row in self.rows:
            if row.m == m and row.variant == variant:
                return row.value
        raise KeyError((m, variant))

    def variants(self) -> list[str]:
        seen = []
        for row in self.rows:
            if row.variant not in seen:
                seen.append(row.variant)
        return seen


def _eval_masks(records, K, m, seed):
    if m == 0:
        return None
    masks = []
    for i in range(len(records)):
        rng = np.random.default_rng([seed, m, i])
        masks.append(sample_occlusion_pattern(K, m, rng))
    return masks


def occlusion_sweep(
    lifters: dict[str, MlpModel] | None,
    classifiers: dict[str, tuple[FallNetModel, MlpModel | None]] | None,
    records: list[PoseRecord],
    m_grid: list[int],
    seed: int,
    layout: JointLayout = COCO_LAYOUT,
    dataset_id: str = "",
    frame: ReferenceFrame = DEFAULT_FRAME,
) -> SweepResult:
    """Evaluate each model variant at every occlusion count in ``m_grid``.

    Lifters are scored by MPJPE (mm), classifiers (paired with the lifter
    feeding their 3d branch) by weighted F1. Patterns are seeded per
    (seed, m, record index), so identical seeds reproduce identical sweeps.
    """
    gts = np.array([r.label_index for r in records])
    rows = []
    for m in sorted(m_grid):
        if not 0 <= m < layout.K:
            raise ParameterError(f"m={m} outside [0, K)")
        masks = _eval_masks(records, layout.K, m, seed)
        for name, model in (lifters or {}).items():
            value = evaluate_mpjpe(model, records, layout, masks, frame)
            rows.append(SweepRow(m, name, "mpjpe_mm", value, seed, dataset_id))
        for name, (clf, lifter) in (classifiers or {}).items():
            P, Q = fallnet_inputs(clf, lifter, records, layout, masks, frame)
            preds = classify_batch(clf, P, Q)
            report = weighted_prf(preds, gts, n_classes=clf.cfg.n_classes)
            rows.append(SweepRow(m, name, "weighted_f1", report.weighted_f1, seed, dataset_id))
    return SweepResult(rows)


# -- emission --------------------------------------------------------------

SWEEP_COLUMNS = ("m", "variant", "metric", "value", "seed", "dataset_id")
REPORT_COLUMNS = ("class", "precision", "recall", "f1", "support")


def sweep_to_csv(result: SweepResult, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_COLUMNS)
        for row in result.rows:
            writer.writerow(
                [row.m, row.variant, row.metric, repr(row.value), row.seed, row.dataset_id]
            )


def sweep_from_csv(path) -> SweepResult:
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for d in reader:
            rows.append(
                SweepRow(
                    int(d["m"]),
                    d["variant"],
                    d["metric"],
                    float(d["value"]),
                    int(d["seed"]),
                    d["dataset_id"],
                )
            )
    return SweepResult(rows)


def report_to_csv(report: ClassificationReport, path, class_names=LABELS):
    with open(path, "w", newline="") as f:
        f.write("# precision/recall are 0 when their denominator is 0\n")
        writer = csv.writer(f)
        writer.writerow(REPORT_COLUMNS)
        for c, cr in report.per_class.items():
            name = class_names[c] if c < len(class_names) else str(c)
            writer.writerow([name, repr(cr.precision), repr(cr.recall), repr(cr.f1), cr.support])
        writer.writerow(
            [
                "weighted",
                repr(report.weighted_precision),
                repr(report.weighted_recall),
                repr(report.weighted_f1),
                report.n_samples,
            ]
        )


def sweep_chart(result: SweepResult, path):
    """Line chart of metric vs occlusion count, one series per variant (SVG/PDF)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for variant in result.variants():
        pts = sorted((r.m, r.value) for r in result.rows if r.variant == variant)
        ax.plot([m for m, _ in pts], [v for _, v in pts], marker="o", label=variant)
    metrics = {r.metric for r in result.rows}
    ax.set_xlabel("occluded joints")
    ax.set_ylabel(" / ".join(sorted(metrics)))
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
