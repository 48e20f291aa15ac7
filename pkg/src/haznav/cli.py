"""Command-line experiment runner.

Subcommands: world | dataset | train | eval | heatmap.  Values resolve
as flag > config file > built-in default; every run echoes its effective
config into the output directory so it can be reproduced from the echo
alone.  HAZNAV_THREADS caps BLAS-level parallelism when threadpoolctl
is available.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .experiment import (
    ConfigError,
    EvalReport,
    ExperimentConfig,
    build_experiment_dataset,
    build_worlds,
    run_cases,
    train_case,
)
from .ppm import write_ppm
from .render import render
from .threat import write_heatmap_csv


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def _apply_thread_cap():
    cap = os.environ.get("HAZNAV_THREADS")
    if not cap:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(int(cap))
    except (ImportError, ValueError):
        pass


def load_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise StageError("config", exc)
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if getattr(args, "frames", None):
        try:
            h, w = (int(p) for p in args.frames.lower().split("x"))
        except ValueError:
            raise StageError("config", ValueError(f"--frames must be HxW, got {args.frames!r}"))
        doc.setdefault("frames", {})
        doc["frames"]["height"] = h
        doc["frames"]["width"] = w
    try:
        return ExperimentConfig.from_dict(doc)
    except ConfigError as exc:
        raise StageError("config", exc)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg: ExperimentConfig, out: Path):
    (out / "config.echo.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n")


def cmd_world(args) -> int:
    cfg = load_config(args)
    out = _out_dir(args)
    try:
        world, _, _ = build_worlds(cfg)
    except Exception as exc:
        raise StageError("world", exc)
    doc = {
        "config": cfg.world.to_dict(),
        "total_length_m": world.road.total_length,
        "start": {"x": world.vehicle.x, "y": world.vehicle.y, "heading": world.vehicle.heading},
        "hazards": [
            {
                "kind": h.kind.name,
                "x": h.x,
                "y": h.y,
                "heading": h.heading,
                "station_m": h.station,
                "lane_lateral_m": h.lane_lateral,
            }
            for h in world.hazards
        ],
    }
    (out / "world.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    write_ppm(out / "preview.ppm", render(world, cfg.rig()))
    _echo_config(cfg, out)
    print(f"world: {len(world.hazards)} hazards on {world.road.total_length:.0f} m -> {out}")
    return 0


def cmd_dataset(args) -> int:
    cfg = load_config(args)
    out = _out_dir(args)
    try:
        ds = build_experiment_dataset(cfg)
    except Exception as exc:
        raise StageError("dataset", exc)
    frames_dir = out / "frames"
    if not args.no_frames:
        frames_dir.mkdir(exist_ok=True)
    split_of = {}
    for name, idxs in (("train", ds.train_idx), ("validation", ds.val_idx), ("test", ds.test_idx)):
        for i in idxs:
            split_of[i] = name
    entries = []
    for i, rec in enumerate(ds.records):
        files = None
        if not args.no_frames:
            sample = ds.sample(i)
            files = {}
            for camera, img in (
                ("center", sample.center),
                ("left", sample.left),
                ("right", sample.right),
                ("seg", sample.segmented),
            ):
                rel = f"frames/sample_{i:05d}_{camera}.ppm"
                write_ppm(out / rel, img)
                files[camera] = rel
        entries.append(
            {
                "index": i,
                "split": split_of[i],
                "label": rec.label,
                "t_ms": rec.t_ms,
                "has_hazard": rec.has_hazard,
                "augmented": rec.augmented,
                "files": files,
            }
        )
    manifest = {"counts": ds.counts(), "master_seed": cfg.master_seed, "samples": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    with open(out / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "split", "label", "t_ms", "has_hazard"])
        for e in entries:
            w.writerow([e["index"], e["split"], repr(e["label"]), e["t_ms"], int(e["has_hazard"])])
    _echo_config(cfg, out)
    c = ds.counts()
    print(
        f"dataset: {c['total']} pooled ({c['train']} train / {c['validation']} validation), "
        f"{c['test']} test -> {out}"
    )
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args)
    out = _out_dir(args)
    try:
        ds = build_experiment_dataset(cfg)
    except Exception as exc:
        raise StageError("dataset", exc)
    try:
        net, hist = train_case(cfg, ds, args.case)
    except Exception as exc:
        raise StageError("train", exc)
    net.save_weights(out / f"weights_case{args.case}.json")
    hist.to_csv(out / f"history_case{args.case}.csv")
    _echo_config(cfg, out)
    best = dict((e, v) for e, _, v in hist.epochs)[hist.best_epoch]
    print(
        f"case {args.case}: stopped after epoch {hist.stopped_epoch}, "
        f"best validation loss {best:.6f} at epoch {hist.best_epoch} -> {out}"
    )
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args)
    out = _out_dir(args)
    try:
        report: EvalReport = run_cases(cfg, out_dir=out)
    except Exception as exc:
        raise StageError("eval", exc)
    print(report.summary_text(), end="")
    return 0


def cmd_heatmap(args) -> int:
    cfg = load_config(args)
    out = _out_dir(args)
    path = out / f"heatmap_{args.procedure}.csv"
    try:
        write_heatmap_csv(
            path,
            args.procedure,
            grid_n=args.grid,
            cfg=cfg.threat,
            image_h=cfg.frame_height,
            image_w=cfg.frame_width,
        )
    except Exception as exc:
        raise StageError("heatmap", exc)
    print(f"heatmap ({args.procedure}, {args.grid}x{args.grid}) -> {path}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="haznav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--frames", default=None, help="frame size HxW override")

    p = sub.add_parser("world", help="build a world, write geometry + preview render")
    common(p)
    p.set_defaults(func=cmd_world)

    p = sub.add_parser("dataset", help="collect/augment/split the dataset")
    common(p)
    p.add_argument("--no-frames", action="store_true", help="skip writing frame PPMs")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train one experiment case")
    common(p)
    p.add_argument("--case", type=int, choices=(1, 2, 3), required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run the full three-case protocol")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("heatmap", help="threat-value grid CSV for plotting")
    common(p)
    p.add_argument("--procedure", choices=("radar", "pixel"), required=True)
    p.add_argument("--grid", type=int, default=50)
    p.set_defaults(func=cmd_heatmap)
    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
