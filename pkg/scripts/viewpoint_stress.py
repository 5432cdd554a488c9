#!/usr/bin/env python3
"""Viewpoint-generalization study: 2d+3d fusion vs 2d-only classification.

Trains both classifier variants on a standard-elevation corpus, then
evaluates them out of distribution on a stress split shot from
low-elevation cameras, where near-horizontal viewpoints make 2d pose
alone ambiguous. Writes one report per variant and prints weighted F1.

    python3 scripts/viewpoint_stress.py --out runs/stress
"""
import argparse
from pathlib import Path

from sshfd.engine import TrainSchedule
from sshfd.evalharness import report_to_csv, weighted_prf
from sshfd.fallnet import FallNetConfig, classify_batch, fallnet_inputs, train_fallnet
from sshfd.ojr import OjrConfig
from sshfd.posenet3d import PoseNet3dConfig, train_posenet3d
from sshfd.synthgen import CameraBounds, GeneratorConfig, generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--size", type=int, default=20000)
    ap.add_argument("--stress-size", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--clf-epochs", type=int, default=60)
    ap.add_argument("--elevation", type=float, nargs=2, default=(0.0, 10.0),
                    metavar=("LO", "HI"), help="stress camera elevation range, degrees")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    dataset = generate_dataset(args.size, seed=args.seed)
    train, _ = dataset.split(0.7, seed=args.seed)
    stress_cfg = GeneratorConfig(camera=CameraBounds(elevation_deg=tuple(args.elevation)))
    stress = generate_dataset(args.stress_size, seed=args.seed + 1, config=stress_cfg)
    print(f"train: {len(train)} standard records; stress: {len(stress)} "
          f"records at elevation {tuple(args.elevation)} deg")

    lifter, _ = train_posenet3d(
        train, TrainSchedule(epochs=args.epochs, seed=0), OjrConfig(enabled=False),
        PoseNet3dConfig(hidden0=256, hidden=512),
    )
    print("lifter trained")

    fsch = TrainSchedule(epochs=args.clf_epochs, seed=1)
    variants = {
        "fallnet_2d3d": (FallNetConfig(feat_dim=256, embed_dim=64), lifter),
        "fallnet_2d": (FallNetConfig(feat_dim=256, embed_dim=64, use_3d=False), None),
    }
    gts = stress.labels()
    for name, (cfg, pnet) in variants.items():
        model, _ = train_fallnet(train, pnet, fsch, OjrConfig(enabled=False), cfg)
        P, Q = fallnet_inputs(model, pnet, stress.records, stress.layout)
        report = weighted_prf(classify_batch(model, P, Q), gts, n_classes=2)
        report_to_csv(report, out / f"{name}_report.csv")
        print(f"{name}: stress weighted F1 = {report.weighted_f1:.4f}")


if __name__ == "__main__":
    main()
