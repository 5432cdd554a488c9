"""Command-line entry point for the full pipeline.

Subcommands: gen-data, train, eval, sweep, predict, selftest.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import errors
from .config import RunConfig, echo_config, load_config
from .data import LABELS, import_coco_keypoints, read_jsonl, write_jsonl
from .evalharness import (
    occlusion_sweep,
    report_to_csv,
    sweep_chart,
    sweep_to_csv,
    weighted_prf,
)
from .fallnet import classify, fallnet_inputs, classify_batch, train_fallnet
from .features import input_vec_2d, record_normalized_pose2d
from .layout import COCO_LAYOUT, DEFAULT_FRAME
from .model_io import load_fallnet, load_posenet, save_fallnet, save_posenet
from .ojr import OjrConfig, apply_occlusion, sample_occlusion_pattern
from .posenet3d import evaluate_mpjpe, train_posenet3d
from .synthgen import generate_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _write_history_csv(history: list[dict], path):
    if not history:
        return
    cols = list(history[0].keys())
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for row in history:
            f.write(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in cols) + "\n")


def _load_run_config(args) -> RunConfig:
    overrides = {}
    for item in args.set or []:
        key, _, value = item.partition("=")
        if not value:
            raise errors.ParameterError(f"--set expects section.key=value, got {item!r}")
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass  # keep as string
        overrides[key] = value
    if getattr(args, "seed", None) is not None:
        overrides["schedule.seed"] = args.seed
        overrides["ojr.seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        overrides["schedule.epochs"] = args.epochs
    return load_config(args.config, overrides)


def cmd_gen_data(args) -> int:
    if args.size <= 0:
        print("error: --size must be positive", file=sys.stderr)
        return EXIT_USAGE
    config = _load_run_config(args)
    dataset = generate_dataset(args.size, args.seed if args.seed is not None else 0,
                               config.generator)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(dataset, out)
    echo_config(config, out.parent)
    counts = dataset.class_counts()
    summary = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    print(f"wrote {len(dataset)} records to {out} ({summary})")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_run_config(args)
    dataset = read_jsonl(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(config, out_dir)
    ojr = config.ojr
    if args.ojr is not None:
        ojr = OjrConfig(**{**ojr.__dict__, "enabled": args.ojr == "on"})
    train_set, val_set = dataset.split(0.7, config.schedule.seed)
    schedule = config.schedule
    print(
        f"schedule: epochs={schedule.epochs} lr0={schedule.lr0} "
        f"decay_at={list(schedule.decay_epochs)} weight_decay={schedule.weight_decay} "
        f"dropout={schedule.dropout_p} batch_size={schedule.batch_size} "
        f"ojr={'on' if ojr.enabled else 'off'}"
    )
    if args.model == "posenet3d":
        model, history = train_posenet3d(
            train_set, schedule, ojr, config.posenet3d, val_records=val_set.records
        )
        save_posenet(out_dir / "model.ckpt", model, config.posenet3d, schedule, dataset.layout)
        final = history[-1]
        print(f"final train_loss={final['train_loss']:.6g} val_mpjpe={final['val_mpjpe']:.4g} mm")
    else:
        posenet = None
        fcfg = config.fallnet
        if fcfg.use_3d and not fcfg.use_gt_3d:
            if not args.posenet:
                print("error: --posenet checkpoint required for fallnet training", file=sys.stderr)
                return EXIT_USAGE
            posenet, _, _ = load_posenet(args.posenet)
        model, history = train_fallnet(
            train_set, posenet, schedule, ojr, fcfg, val_records=val_set.records
        )
        save_fallnet(out_dir / "model.ckpt", model, schedule, dataset.layout)
        final = history[-1]
        print(f"final train_loss={final['train_loss']:.6g} val_accuracy={final['val_accuracy']:.4g}")
    _write_history_csv(history, out_dir / "history.csv")
    return EXIT_OK


def _parse_named(values, default_prefix):
    """Parse repeatable NAME=PATH (or bare PATH) flags into an ordered dict."""
    out = {}
    for i, item in enumerate(values or []):
        if "=" in item:
            name, path = item.split("=", 1)
        else:
            name, path = f"{default_prefix}{i}" if i else default_prefix, item
        out[name] = path
    return out


def cmd_eval(args) -> int:
    dataset = read_jsonl(args.data)
    layout = dataset.layout
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    masks = None
    if args.occlude_count:
        masks = [
            sample_occlusion_pattern(
                layout.K, args.occlude_count, np.random.default_rng([args.occlude_seed, i])
            )
            for i in range(len(dataset))
        ]
    posenet = None
    if args.posenet:
        posenet, _, pmeta = load_posenet(args.posenet)
        if pmeta["layout"]["names"] != list(layout.names):
            print("error: posenet checkpoint layout does not match the dataset", file=sys.stderr)
            return EXIT_DATA
        if all(r.joints3d is not None for r in dataset):
            mp = evaluate_mpjpe(posenet, dataset.records, layout, masks)
            print(f"lifter MPJPE: {mp:.4g} mm")
    if args.fallnet:
        fnet, fmeta = load_fallnet(args.fallnet)
        if fnet.cfg.use_3d and not fnet.cfg.use_gt_3d and posenet is None:
            print("error: this fallnet needs a --posenet lifter", file=sys.stderr)
            return EXIT_USAGE
        P, Q = fallnet_inputs(fnet, posenet, dataset.records, layout, masks)
        preds = classify_batch(fnet, P, Q)
        report = weighted_prf(preds, dataset.labels(), n_classes=fnet.cfg.n_classes)
        report_to_csv(report, out_dir / "report.csv")
        print(
            f"weighted F1={report.weighted_f1:.4f} precision={report.weighted_precision:.4f} "
            f"recall={report.weighted_recall:.4f} (n={report.n_samples})"
        )
    return EXIT_OK


def cmd_sweep(args) -> int:
    dataset = read_jsonl(args.data)
    layout = dataset.layout
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    m_grid = [int(m) for m in args.occlude_grid.split(",")]
    lifters = {}
    for name, path in _parse_named(args.posenet, "lifter").items():
        lifters[name], _, _ = load_posenet(path)
    classifiers = {}
    for name, spec in _parse_named(args.fallnet, "fallnet").items():
        if "@" in spec:
            path, lifter_name = spec.rsplit("@", 1)
            lifter = lifters[lifter_name]
        else:
            path = spec
            lifter = next(iter(lifters.values())) if lifters else None
        fnet, _ = load_fallnet(path)
        classifiers[name] = (fnet, lifter)
    if not lifters and not classifiers:
        print("error: provide at least one --posenet or --fallnet", file=sys.stderr)
        return EXIT_USAGE
    result = occlusion_sweep(
        lifters,
        classifiers,
        dataset.records,
        m_grid,
        args.seed or 0,
        layout,
        dataset_id=Path(args.data).name,
    )
    sweep_to_csv(result, out_dir / "sweep.csv")
    if args.chart:
        sweep_chart(result, out_dir / "sweep.svg")
    for row in result.rows:
        print(f"m={row.m} {row.variant} {row.metric}={row.value:.6g}")
    return EXIT_OK


def cmd_predict(args) -> int:
    path = Path(args.input)
    try:
        if path.suffix == ".json":
            with open(path) as f:
                dataset = import_coco_keypoints(json.load(f))
        else:
            dataset = read_jsonl(path)
    except errors.DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    layout = dataset.layout
    posenet, _, _ = load_posenet(args.posenet)
    fnet, _ = load_fallnet(args.fallnet)
    out = open(args.out, "w") if args.out else sys.stdout
    skipped = 0
    try:
        for rec in dataset:
            warn = ""
            if not rec.joints2d.visibility.any():
                # degenerate input: emit a prediction but flag it
                pvec = np.full(2 * layout.K, -1.0)
                warn = " low_confidence=all_joints_invisible"
            else:
                try:
                    bbox = rec.bbox if args.bbox_source == "annotation" and rec.bbox else None
                    if bbox is not None:
                        from .pose import normalize_pose2d

                        pose = normalize_pose2d(rec.joints2d, bbox)
                    else:
                        pose = record_normalized_pose2d(rec)
                    pvec = input_vec_2d(pose)
                except errors.SshfdError as e:
                    print(f"warning: skipping record {rec.id}: {e}", file=sys.stderr)
                    skipped += 1
                    continue
            q = posenet.forward(pvec, train=False)[0]
            pred = classify(fnet, pvec, q)
            out.write(f"{rec.id} {pred.fall_probability:.6f} {pred.label}{warn}\n")
    finally:
        if args.out:
            out.close()
    print(f"predicted {len(dataset) - skipped} records, skipped {skipped}", file=sys.stderr)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    ok = run_selftest(verbose=True)
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sshfd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=None):
        p.add_argument("--config", default=None, help="YAML run-config file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one config key")
        p.add_argument("--seed", type=int, default=seed_default)

    p = sub.add_parser("gen-data", help="generate a synthetic pose dataset")
    common(p, seed_default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the lifter or the classifier")
    common(p)
    p.add_argument("--model", choices=["posenet3d", "fallnet"], required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ojr", choices=["on", "off"], default=None)
    p.add_argument("--posenet", help="frozen lifter checkpoint (fallnet training)")
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints on a dataset")
    p.add_argument("--posenet")
    p.add_argument("--fallnet")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--occlude-count", type=int, default=0)
    p.add_argument("--occlude-seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="occlusion-robustness sweep")
    p.add_argument("--posenet", action="append", metavar="[NAME=]CKPT")
    p.add_argument("--fallnet", action="append", metavar="[NAME=]CKPT[@LIFTER]")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--occlude-grid", default="0,1,2,3,4,5,6,7,8")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chart", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="per-record fall predictions")
    p.add_argument("--posenet", required=True)
    p.add_argument("--fallnet", required=True)
    p.add_argument("--input", required=True, help="keypoints JSONL or COCO json")
    p.add_argument("--bbox-source", choices=["keypoints", "annotation"], default="keypoints")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("selftest", help="run built-in verification checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except errors.NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (errors.DataError, errors.CheckpointError, errors.DegenerateLabelsError,
            FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except errors.SshfdError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
