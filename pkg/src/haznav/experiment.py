"""Experiment configuration and the three-case protocol runner.

One master seed drives everything; each consumer gets its own stream via
``derive_seed(master, label)`` with the labels listed in ``SEED_LABELS``,
so adding a consumer never perturbs the others.

``run_cases`` executes the full protocol: build the worlds, collect and
split the dataset, train one controller per case wiring (raw frames /
radar-threat fusion / pixel-threat fusion), score open-loop steering
errors on the hazard-only test split, then roll each controller out in a
fresh hazard world and compare trajectories against the scripted expert
inside a window around the first hazard encounter (trajectory RMSE and a
paired t-test on per-timestep lateral offsets).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import (
    ZeroVarianceError,
    improvement,
    mae,
    paired_t_test,
    rmse,
    trajectory_rmse,
)
from .net.model import ControllerNet
from .net.schedule import LayerSchedule
from .net.train import TrainConfig, train
from .pipeline import AUGMENT_TRANSFORMS, CaptureConfig, Dataset, build_dataset, normalize_image
from .policy import CASE_IDS, CasePolicy, PurePursuitExpert, build_case_input
from .render import CameraRig
from .rng import Rng, derive_seed
from .simloop import rollout
from .threat import ThreatConfig
from .world import WorldConfig, build_world

SEED_LABELS = (
    "world.train",
    "world.test",
    "world.eval",
    "dataset",
    "init.case1",
    "init.case2",
    "init.case3",
    "train.case1",
    "train.case2",
    "train.case3",
)


class ConfigError(ValueError):
    def __init__(self, problems):
        super().__init__("invalid config:\n  " + "\n  ".join(problems))
        self.problems = list(problems)


@dataclass(frozen=True)
class EvalWindow:
    duration_ms: int = 50000
    window_before_ms: int = 5000
    window_after_ms: int = 5000

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class ExperimentConfig:
    master_seed: int = 7
    frame_height: int = 100
    frame_width: int = 150
    camera: CameraRig = field(default_factory=CameraRig)
    world: WorldConfig = field(default_factory=WorldConfig)
    test_world: WorldConfig = field(
        default_factory=lambda: WorldConfig(
            total_length=700.0, n_curves=2, hazard_count=8, hazard_station_min=60.0
        )
    )
    eval_world: WorldConfig = field(
        default_factory=lambda: WorldConfig(
            total_length=500.0,
            n_curves=2,
            hazard_count=3,
            hazard_station_min=120.0,
            hazard_station_margin_end=60.0,
        )
    )
    capture: CaptureConfig = field(default_factory=CaptureConfig)
    threat: ThreatConfig = field(default_factory=ThreatConfig)
    schedule: LayerSchedule = field(default_factory=LayerSchedule.desk_slim)
    train: TrainConfig = field(
        default_factory=lambda: TrainConfig(max_epochs=8, patience=2)
    )
    eval: EvalWindow = field(default_factory=EvalWindow)

    def rig(self) -> CameraRig:
        from dataclasses import replace

        return replace(self.camera, image_height=self.frame_height, image_width=self.frame_width)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        rig = self.camera
        return {
            "master_seed": self.master_seed,
            "frames": {"height": self.frame_height, "width": self.frame_width},
            "camera": {
                "hfov_deg": math.degrees(rig.hfov_rad),
                "cam_height": rig.cam_height,
                "forward_offset": rig.forward_offset,
                "side_offset": rig.side_offset,
                "side_yaw_deg": math.degrees(rig.side_yaw_rad),
            },
            "world": self.world.to_dict(),
            "test_world": self.test_world.to_dict(),
            "eval_world": self.eval_world.to_dict(),
            "capture": {
                "collect_count": self.capture.collect_count,
                "test_count": self.capture.test_count,
                "capture_every": self.capture.capture_every,
                "augment": self.capture.augment,
                "transforms": list(self.capture.transforms),
            },
            "threat": {
                "lx_max_cm": self.threat.lx_max_cm,
                "ly_max_cm": self.threat.ly_max_cm,
                "t_min": self.threat.t_min,
                "t_max": self.threat.t_max,
            },
            "schedule": self.schedule.to_dict(),
            "train": self.train.to_dict(),
            "eval": self.eval.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        problems = []
        cfg = cls()
        known = {
            "master_seed",
            "frames",
            "camera",
            "world",
            "test_world",
            "eval_world",
            "capture",
            "threat",
            "schedule",
            "train",
            "eval",
        }
        for key in doc:
            if key not in known:
                problems.append(f"{key}: unknown config section")
        try:
            base = cfg.to_dict()
        except Exception:  # pragma: no cover
            raise
        merged = _deep_merge(base, {k: v for k, v in doc.items() if k in known})
        cfg = cls._build(merged, problems)
        problems += cfg.validate() if cfg is not None else []
        if problems:
            raise ConfigError(problems)
        return cfg

    @classmethod
    def _build(cls, d: dict, problems: list) -> "ExperimentConfig":
        def section(name, builder, default):
            try:
                return builder(d[name])
            except (ValueError, KeyError, TypeError) as exc:
                problems.append(f"{name}: {exc}")
                return default

        cam = d["camera"]
        rig = section(
            "camera",
            lambda c: CameraRig(
                hfov_rad=math.radians(c["hfov_deg"]),
                cam_height=c["cam_height"],
                forward_offset=c["forward_offset"],
                side_offset=c["side_offset"],
                side_yaw_rad=math.radians(c["side_yaw_deg"]),
            ),
            CameraRig(),
        )
        capture = section(
            "capture",
            lambda c: CaptureConfig(
                collect_count=c["collect_count"],
                test_count=c["test_count"],
                capture_every=c["capture_every"],
                augment=c["augment"],
                transforms=tuple(c["transforms"]),
            ),
            CaptureConfig(),
        )
        return cls(
            master_seed=d["master_seed"],
            frame_height=d["frames"]["height"],
            frame_width=d["frames"]["width"],
            camera=rig,
            world=section("world", WorldConfig.from_dict, WorldConfig()),
            test_world=section("test_world", WorldConfig.from_dict, WorldConfig()),
            eval_world=section("eval_world", WorldConfig.from_dict, WorldConfig()),
            capture=capture,
            threat=section("threat", lambda c: ThreatConfig(**c), ThreatConfig()),
            schedule=section("schedule", LayerSchedule.from_dict, LayerSchedule.desk_slim()),
            train=section("train", TrainConfig.from_dict, TrainConfig()),
            eval=section("eval", lambda c: EvalWindow(**c), EvalWindow()),
        )

    def validate(self) -> list:
        problems = []
        if self.frame_height < 2 or self.frame_width < 2:
            problems.append("frames: height and width must be at least 2")
        if self.frame_height - self.schedule.crop_rows != self.schedule.input_hw[0]:
            problems.append(
                f"schedule.input_hw[0]: frame height {self.frame_height} minus crop "
                f"{self.schedule.crop_rows} must equal the net input height "
                f"{self.schedule.input_hw[0]}"
            )
        if self.frame_width != self.schedule.input_hw[1]:
            problems.append("schedule.input_hw[1]: must equal the frame width")
        if self.capture.collect_count < 5:
            problems.append("capture.collect_count: must be at least 5")
        if self.capture.capture_every < 1:
            problems.append("capture.capture_every: must be at least 1")
        for name, wc in (
            ("world", self.world),
            ("test_world", self.test_world),
            ("eval_world", self.eval_world),
        ):
            if wc.hazard_count < 0:
                problems.append(f"{name}.hazard_count: must be >= 0")
            if wc.speed <= 0:
                problems.append(f"{name}.speed: must be positive")
            if wc.dt_ms <= 0:
                problems.append(f"{name}.dt_ms: must be positive")
            if wc.hazard_lane not in ("driving", "random"):
                problems.append(f"{name}.hazard_lane: must be 'driving' or 'random'")
        if self.eval.duration_ms % self.eval_world.dt_ms != 0:
            problems.append("eval.duration_ms: must be a multiple of eval_world.dt_ms")
        if not set(self.capture.transforms) <= set(AUGMENT_TRANSFORMS):
            problems.append(f"capture.transforms: must be among {AUGMENT_TRANSFORMS}")
        return problems


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# report


@dataclass
class CaseResult:
    rmse: float
    mae: float
    improvement_pct: float | None
    trajectory_rmse: float
    t_stat: float | None
    df: int | None
    p_value: float | None
    reject_95: bool | None
    epochs_trained: int
    best_epoch: int
    left_road: bool
    collided: bool


@dataclass
class EvalReport:
    master_seed: int
    cases: dict  # "case1" -> CaseResult
    window_t_ms: tuple

    def to_json(self) -> str:
        doc = {
            "master_seed": self.master_seed,
            "window_t_ms": list(self.window_t_ms),
            "cases": {
                name: {k: getattr(r, k) for k in r.__dataclass_fields__}
                for name, r in self.cases.items()
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def summary_text(self) -> str:
        lines = [
            f"three-case evaluation (master seed {self.master_seed})",
            f"comparison window: {self.window_t_ms[0]}..{self.window_t_ms[1]} ms",
            "",
            f"{'case':8} {'rmse':>10} {'mae':>10} {'improve%':>10} "
            f"{'traj rmse':>10} {'t':>9} {'p':>12} {'sig@95%':>8}",
        ]
        for name in sorted(self.cases):
            r = self.cases[name]
            imp = "-" if r.improvement_pct is None else f"{r.improvement_pct:.1f}"
            t = "-" if r.t_stat is None else f"{r.t_stat:.3f}"
            p = "-" if r.p_value is None else f"{r.p_value:.6f}"
            sig = "-" if r.reject_95 is None else ("yes" if r.reject_95 else "no")
            lines.append(
                f"{name:8} {r.rmse:10.5f} {r.mae:10.5f} {imp:>10} "
                f"{r.trajectory_rmse:10.4f} {t:>9} {p:>12} {sig:>8}"
            )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# protocol stages


def build_worlds(cfg: ExperimentConfig):
    m = cfg.master_seed
    return (
        build_world(Rng(derive_seed(m, "world.train")), cfg.world),
        build_world(Rng(derive_seed(m, "world.test")), cfg.test_world),
        build_world(Rng(derive_seed(m, "world.eval")), cfg.eval_world),
    )


def build_experiment_dataset(cfg: ExperimentConfig, world_train=None, world_test=None) -> Dataset:
    if world_train is None or world_test is None:
        world_train, world_test, _ = build_worlds(cfg)
    return build_dataset(
        [world_train],
        world_test,
        PurePursuitExpert,
        cfg.capture,
        cfg.rig(),
        Rng(derive_seed(cfg.master_seed, "dataset")),
    )


def case_input_tensor(cfg: ExperimentConfig, dataset: Dataset, indices, case: int) -> np.ndarray:
    """Normalized controller inputs (N, h, w, 3) for one case wiring."""
    out = np.empty(
        (len(indices), *cfg.schedule.input_hw, 3), dtype=np.float64
    )
    for row, i in enumerate(indices):
        s = dataset.sample(i)
        raw = build_case_input(case, s.center, s.segmented, s.radar, cfg.threat)
        out[row] = normalize_image(raw, crop_rows=cfg.schedule.crop_rows).data
    return out


def train_case(cfg: ExperimentConfig, dataset: Dataset, case: int):
    """Train one case's controller; returns (net, history)."""
    m = cfg.master_seed
    x_tr = case_input_tensor(cfg, dataset, dataset.train_idx, case)
    y_tr = dataset.labels(dataset.train_idx)
    x_va = case_input_tensor(cfg, dataset, dataset.val_idx, case)
    y_va = dataset.labels(dataset.val_idx)
    net = ControllerNet(cfg.schedule, rng=Rng(derive_seed(m, f"init.case{case}")))
    return train(net, x_tr, y_tr, x_va, y_va, cfg.train, Rng(derive_seed(m, f"train.case{case}")))


def encounter_window(cfg: ExperimentConfig, world_eval, ground) -> tuple:
    """Time window around the ground-truth rollout's first hazard encounter."""
    if world_eval.hazards:
        first = min(world_eval.hazards, key=lambda h: h.station)
        k = int(np.argmin(np.abs(ground.station_m - first.station)))
        center = int(ground.t_ms[k])
    else:
        center = int(ground.t_ms[-1] // 2)
    lo = max(0, center - cfg.eval.window_before_ms)
    hi = center + cfg.eval.window_after_ms
    return lo, hi


def run_cases(cfg: ExperimentConfig, out_dir: Path | str | None = None) -> EvalReport:
    world_train, world_test, world_eval = build_worlds(cfg)
    dataset = build_experiment_dataset(cfg, world_train, world_test)
    y_test = dataset.labels(dataset.test_idx)
    rig = cfg.rig()

    nets = {}
    histories = {}
    open_loop = {}
    for case in CASE_IDS:
        net, hist = train_case(cfg, dataset, case)
        x_te = case_input_tensor(cfg, dataset, dataset.test_idx, case)
        preds = net.forward(x_te)
        open_loop[case] = (rmse(y_test, preds), mae(y_test, preds))
        nets[case] = net
        histories[case] = hist

    ground = rollout(world_eval, PurePursuitExpert(world_eval), cfg.eval.duration_ms)
    lo, hi = encounter_window(cfg, world_eval, ground)
    trajectories = {"ground": ground}
    cases = {}
    for case in CASE_IDS:
        traj = rollout(
            world_eval,
            CasePolicy(nets[case], case, cfg.threat),
            cfg.eval.duration_ms,
            rig=rig,
        )
        trajectories[f"case{case}"] = traj
        traj_err = trajectory_rmse(ground, traj, t_start_ms=lo, t_end_ms=hi)
        sel = (ground.t_ms >= lo) & (ground.t_ms <= hi) & (ground.t_ms <= traj.t_ms[-1])
        g_lat = ground.lateral_m[sel]
        c_lat = np.interp(ground.t_ms[sel], traj.t_ms, traj.lateral_m)
        try:
            tt = paired_t_test(g_lat, c_lat)
            t_stat, df, p, reject = tt.t, tt.df, tt.p, tt.reject
        except (ZeroVarianceError, ValueError):
            t_stat = df = p = reject = None
        e_rmse, e_mae = open_loop[case]
        cases[f"case{case}"] = CaseResult(
            rmse=e_rmse,
            mae=e_mae,
            improvement_pct=None if case == 1 else improvement(e_rmse, open_loop[1][0]),
            trajectory_rmse=traj_err,
            t_stat=t_stat,
            df=df,
            p_value=p,
            reject_95=reject,
            epochs_trained=histories[case].stopped_epoch,
            best_epoch=histories[case].best_epoch,
            left_road=traj.left_road,
            collided=traj.collided,
        )

    report = EvalReport(master_seed=cfg.master_seed, cases=cases, window_t_ms=(lo, hi))
    if out_dir is not None:
        _write_artifacts(Path(out_dir), cfg, report, trajectories, histories, nets)
    return report


def _write_artifacts(out: Path, cfg, report, trajectories, histories, nets):
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "summary.txt").write_text(report.summary_text())
    (out / "config.echo.json").write_text(
        json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    for name, traj in trajectories.items():
        traj.to_csv(out / f"trajectory_{name}.csv")
    for case, hist in histories.items():
        hist.to_csv(out / f"history_case{case}.csv")
    for case, net in nets.items():
        net.save_weights(out / f"weights_case{case}.json")
    _write_merged_csv(out / "directions.csv", trajectories, "direction_deg")
    _write_merged_csv(out / "laterals.csv", trajectories, "lateral_m")


def _write_merged_csv(path, trajectories, attr):
    import csv as _csv

    names = ["ground"] + [n for n in sorted(trajectories) if n != "ground"]
    base = trajectories["ground"].t_ms
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh, lineterminator="\n")
        w.writerow(["t_ms"] + names)
        for i, t in enumerate(base):
            row = [int(t)]
            for n in names:
                tr = trajectories[n]
                series = getattr(tr, attr)
                if i < len(series) and tr.t_ms[i] == t:
                    row.append(repr(float(series[i])))
                else:
                    row.append("")
            w.writerow(row)
