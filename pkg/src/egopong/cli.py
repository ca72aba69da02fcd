"""Command-line entry point: ``egopong <subcommand> [options]``.

Global flags: ``--config`` (``key = value`` file with ``section.key``
names), ``--seed``, ``--out-dir``, ``--threads``. Every subcommand reads and
writes files in the output directory and updates ``manifest.txt`` with the
config snapshot and a SHA-256 checksum per output.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import logging
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import defaults as D
from .core import (BallMeasurement, CameraModel, ConfigError, DataError, EgopongError, EventWindow, NumericalError,
                   camera_to_world_rotation)
from .detect import STAGES, DetectionParams, detect, iter_windows
from .evalharness import (
    DEFAULT_GRID_DISTANCES,
    DEFAULT_GRID_SPEEDS,
    ForecastProtocol,
    bench_latency,
    build_detection_dataset,
    evaluate_samples,
    impact_rows,
    latency_rows,
    roi_rows,
    run_forecast_protocol,
    sensing_latency_grid,
    write_report,
)
from .io import (
    read_events,
    read_gaze,
    read_imu,
    read_kv,
    read_rows,
    write_events,
    write_gaze,
    write_imu,
    write_kv,
    write_rows,
    write_trajectory,
)
from .measure import NoMeasurementError, measure_window
from .predict import ForecastConfig, forecast_online, forecast_single_batch, gyro_rotations, reject_outliers
from .segment import find_peaks, highpass_filter, read_wav, segment_rallies
from .synth import SceneConfig, random_serve_scene, render_events, simulate_flight

log = logging.getLogger("egopong")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
MANIFEST = "manifest.txt"
TIMING_COLUMNS = tuple(f"{s}_us" for s in STAGES)
DETECTION_FIELDS = ("window", "t_start_us", "found", "reason", "cx", "cy", "radius", "gamma", "n_events",
                    "n_processed") + TIMING_COLUMNS
MEASUREMENT_FIELDS = ("t_s", "cx", "cy", "r", "depth", "method", "unreliable")
PREDICTION_FIELDS = ("t", "px", "py", "pz", "vx", "vy", "vz")
STAGE_ORDER = ("simulate", "detect", "measure", "predict", "eval", "bench", "segment", "report")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _scalar_fields(cls) -> dict[str, type]:
    out = {}
    for f in dataclasses.fields(cls):
        if f.init and f.type in ("float", "int", "bool", "str", float, int, bool, str):
            out[f.name] = {"float": float, "int": int, "bool": bool, "str": str}.get(f.type, f.type)
    return out


def _extra_keys() -> dict[str, dict[str, type]]:
    return {
        "scene": {**_scalar_fields(SceneConfig), "rotation_min": float, "rotation_max": float},
        "camera": _scalar_fields(CameraModel),
        "detect": {k: v for k, v in _scalar_fields(DetectionParams).items()},
        "measure": {"batches": int, "method": str, "radius": float},
        "predict": {**_scalar_fields(ForecastConfig), "mode": str, "online": bool, "t_min": float, "t_max": float,
                    "max_residual_px": float, "max_depth_rel": float},
        "eval": {"eps": float, "windows": int, "trials": int},
        "segment": {"cutoff": float, "order": int, "min_separation": float, "fraction": float, "hit_ratio": float},
    }


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class Config:
    values: dict[str, dict[str, object]] = field(default_factory=dict)
    raw: dict[str, str] = field(default_factory=dict)

    def section(self, name: str) -> dict[str, object]:
        return dict(self.values.get(name, {}))

    def get(self, name: str, key: str, default=None):
        return self.values.get(name, {}).get(key, default)


def load_config(path: str | None) -> Config:
    """Parse a ``section.key = value`` file.

    Raises:
        ConfigError: unknown sections or keys (all listed) or bad values.
    """
    if path is None:
        return Config()
    try:
        raw = read_kv(path)
    except DataError as exc:
        raise ConfigError(str(exc)) from exc
    schema = _extra_keys()
    unknown = []
    values: dict[str, dict[str, object]] = {}
    for full, text in raw.items():
        sec, _, key = full.partition(".")
        if sec not in schema or key not in schema[sec]:
            unknown.append(full)
            continue
        typ = schema[sec][key]
        try:
            val = _parse_bool(text) if typ is bool else typ(text)
        except ValueError as exc:
            raise ConfigError(f"{full}: {exc}") from exc
        values.setdefault(sec, {})[key] = val
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(sorted(unknown)))
    return Config(values, raw)


def camera_from(cfg: Config) -> CameraModel:
    return CameraModel(**cfg.section("camera"))


def detection_params(cfg: Config) -> DetectionParams:
    return DetectionParams(**cfg.section("detect"))


def forecast_config(cfg: Config) -> ForecastConfig:
    extra = ("mode", "online", "t_min", "t_max", "max_residual_px", "max_depth_rel")
    sec = {k: v for k, v in cfg.section("predict").items() if k not in extra}
    return ForecastConfig(**sec)


def scene_from(cfg: Config, seed: int) -> SceneConfig:
    sec = cfg.section("scene")
    rot = (float(sec.pop("rotation_min", 0.05)), float(sec.pop("rotation_max", 0.4)))
    sec.pop("seed", None)
    rng = np.random.default_rng(seed)
    return random_serve_scene(rng, rotation=rot, cam=camera_from(cfg), **sec)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _version() -> str:
    try:
        return metadata.version("egopong")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class Context:
    args: argparse.Namespace
    cfg: Config
    out: Path
    outputs: list[Path] = field(default_factory=list)
    inputs: list[Path] = field(default_factory=list)

    def path(self, name: str) -> Path:
        return self.out / name

    def need(self, name_or_path) -> Path:
        p = Path(name_or_path)
        if not p.is_absolute() and not p.exists():
            p = self.out / p
        if not p.exists():
            raise DataError(f"missing input file: {p}")
        self.inputs.append(p)
        return p

    def wrote(self, *paths: Path) -> None:
        self.outputs.extend(Path(p) for p in paths)


def write_manifest(ctx: Context, stages: Sequence[str]) -> Path:
    path = ctx.path(MANIFEST)
    old = read_kv(path) if path.exists() else {}
    rec: dict[str, object] = {k: v for k, v in old.items() if k.startswith("sha256.")}
    rec.update({
        "tool": "egopong",
        "version": _version(),
        "seed": ctx.args.seed,
        "threads": ctx.args.threads,
        "stages": " ".join(stages) if stages else "-",
        "config": ctx.args.config or "-",
    })
    for k, v in sorted(ctx.cfg.raw.items()):
        rec[f"config.{k}"] = v
    rec["inputs"] = " ".join(sorted({str(p) for p in ctx.inputs})) or "-"
    rec["outputs"] = " ".join(sorted({str(p) for p in ctx.outputs})) or "-"
    for p in sorted(set(ctx.outputs)):
        if p.exists() and p.name != MANIFEST:
            rec[f"sha256.{p.name}"] = _sha256(p)
    write_kv(path, rec)
    return path


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_simulate(ctx: Context) -> None:
    scene = scene_from(ctx.cfg, ctx.args.seed)
    gt = simulate_flight(scene)
    rendered = render_events(gt, scene)
    ext = ".bin" if getattr(ctx.args, "binary", False) else ".csv"
    ev = ctx.path("events" + ext)
    write_events(ev, rendered.events)
    write_gaze(ctx.path("gaze.csv"), rendered.gaze)
    write_imu(ctx.path("imu.csv"), rendered.imu)
    traj = np.column_stack([np.rint(gt.t * 1e6), gt.p])
    write_trajectory(ctx.path("trajectory.csv"), traj)
    rows = [dict(zip(("t_us", "px", "py", "pz", "u", "v", "r"), r)) for r in rendered.cam_track]
    for r in rows:
        r["t_us"] = int(r["t_us"])
    write_rows(ctx.path("cam_track.csv"), ("t_us", "px", "py", "pz", "u", "v", "r"), rows)
    gtr = {"impact_time": gt.impact_time if gt.impact_time is not None else "nan",
           "n_events": len(rendered.events), "n_ball_events": rendered.n_ball_events,
           "mount_pitch": scene.mount_pitch}
    for k, name in enumerate("xyz"):
        gtr[f"impact_{name}"] = gt.impact_point[k] if gt.impact_point is not None else float("nan")
    write_kv(ctx.path("ground_truth.txt"), gtr)
    ctx.wrote(ev, ctx.path("gaze.csv"), ctx.path("imu.csv"), ctx.path("trajectory.csv"),
              ctx.path("cam_track.csv"), ctx.path("ground_truth.txt"))


def _find_events(ctx: Context) -> Path:
    explicit = getattr(ctx.args, "events", None)
    if explicit:
        return ctx.need(explicit)
    for name in ("events.bin", "events.csv"):
        if ctx.path(name).exists():
            return ctx.need(name)
    raise DataError(f"missing input file: {ctx.path('events.csv')}")


def stage_detect(ctx: Context) -> None:
    stream = read_events(_find_events(ctx))
    gaze = read_gaze(ctx.need(getattr(ctx.args, "gaze", None) or "gaze.csv"))
    imu = read_imu(ctx.need(getattr(ctx.args, "imu", None) or "imu.csv"))
    cam = camera_from(ctx.cfg)
    params = detection_params(ctx.cfg)
    det_rows, ball_rows = [], []
    for k, win in enumerate(iter_windows(stream, params.window_dt)):
        res = detect(win, gaze, imu, cam, params)
        row = {"window": k, "t_start_us": win.t_start, "found": res.found, "reason": res.reason,
               "cx": res.center[0] if res.found else float("nan"),
               "cy": res.center[1] if res.found else float("nan"),
               "radius": res.radius if res.found else float("nan"),
               "gamma": res.gamma if res.found else float("nan"),
               "n_events": len(res.ball_events) if res.found else 0, "n_processed": res.n_processed}
        for s in STAGES:
            row[f"{s}_us"] = res.timings_us.get(s, 0.0)
        det_rows.append(row)
        if res.found:
            b = res.ball_events
            for i in range(len(b)):
                ball_rows.append({"window": k, "t_start_us": b.t_start, "t_end_us": b.t_end, "t_us": int(b.t[i]),
                                  "x": int(b.x[i]), "y": int(b.y[i]), "p": int(b.p[i])})
    write_rows(ctx.path("detections.csv"), DETECTION_FIELDS, det_rows)
    write_rows(ctx.path("ball_events.csv"), ("window", "t_start_us", "t_end_us", "t_us", "x", "y", "p"), ball_rows)
    ctx.wrote(ctx.path("detections.csv"), ctx.path("ball_events.csv"))


def stage_measure(ctx: Context) -> None:
    rows = read_rows(ctx.need("ball_events.csv"))
    cam = camera_from(ctx.cfg)
    sec = ctx.cfg.section("measure")
    M = int(sec.get("batches", D.BATCHES))
    method = str(sec.get("method", "tri-point"))
    radius = float(sec.get("radius", D.BALL_RADIUS))
    by_win: dict[int, list[dict]] = {}
    for r in rows:
        by_win.setdefault(int(r["window"]), []).append(r)
    out = []
    for k in sorted(by_win):
        rs = by_win[k]
        win = EventWindow.from_arrays([int(r["t_us"]) for r in rs], [int(r["x"]) for r in rs],
                                      [int(r["y"]) for r in rs], [int(r["p"]) for r in rs],
                                      int(rs[0]["t_start_us"]), int(rs[0]["t_end_us"]))
        try:
            ms = measure_window(win, M, cam, radius, method)
        except NoMeasurementError as exc:
            log.warning("window %d: %s", k, exc)
            continue
        for m in ms:
            out.append({"t_s": m.t, "cx": m.cx_img, "cy": m.cy_img, "r": m.r_img, "depth": m.depth,
                        "method": m.method, "unreliable": m.unreliable})
    write_rows(ctx.path("measurements.csv"), MEASUREMENT_FIELDS, out)
    ctx.wrote(ctx.path("measurements.csv"))


def read_measurements(path) -> list[BallMeasurement]:
    out = []
    for r in read_rows(path):
        out.append(BallMeasurement(float(r["t_s"]), float(r["cx"]), float(r["cy"]), float(r["r"]),
                                   float(r["depth"]), r.get("method", "tri-point"), r.get("unreliable") == "1"))
    return out


def stage_predict(ctx: Context) -> None:
    meas = read_measurements(ctx.need("measurements.csv"))
    sec = ctx.cfg.section("predict")
    mode = getattr(ctx.args, "mode", None) or str(sec.get("mode", "ekf"))
    online = bool(getattr(ctx.args, "online", False) or sec.get("online", False))
    lo, hi = float(sec.get("t_min", -np.inf)), float(sec.get("t_max", np.inf))
    meas = [m for m in meas if lo <= m.t <= hi and not m.unreliable]
    if len(meas) < 2:
        raise DataError("prediction needs at least two reliable measurements")
    n_in = len(meas)
    meas = reject_outliers(meas, float(sec.get("max_residual_px", 10.0)), int(sec.get("degree", D.POLY_DEGREE)),
                           float(sec.get("max_depth_rel", 0.2)))
    if len(meas) < n_in:
        log.info("rejected %d outlying measurements", n_in - len(meas))
    pitch = float(ctx.cfg.get("scene", "mount_pitch", D.MOUNT_PITCH))
    meas = sorted(meas, key=lambda m: m.t)
    if ctx.path("imu.csv").exists():
        R = gyro_rotations(read_imu(ctx.need("imu.csv")), [m.t for m in meas], pitch)
    else:
        R = camera_to_world_rotation(pitch)
    fc = forecast_config(ctx.cfg)
    cam = camera_from(ctx.cfg)
    if online:
        preds = forecast_online(meas, cam=cam, mode=mode, cam_to_world=R, config=fc)
        pred = preds[-1]
        write_rows(ctx.path("online_history.csv"), ("n_updates", "impact_x", "impact_y", "impact_time"),
                   [{"n_updates": p.n_updates,
                     "impact_x": p.impact_point[0] if p.impact_point is not None else float("nan"),
                     "impact_y": p.impact_point[1] if p.impact_point is not None else float("nan"),
                     "impact_time": p.impact_time if p.impact_time is not None else float("nan")} for p in preds])
        ctx.wrote(ctx.path("online_history.csv"))
    else:
        pred = forecast_single_batch(meas, cam=cam, mode=mode, cam_to_world=R, config=fc)
    rows = [dict(zip(PREDICTION_FIELDS, (t, *p, *v))) for t, p, v in zip(pred.t, pred.p, pred.v)]
    write_rows(ctx.path("prediction.csv"), PREDICTION_FIELDS, rows)
    imp = pred.impact_point
    write_kv(ctx.path("impact.txt"), {
        "impact_x": imp[0] if imp is not None else float("nan"),
        "impact_y": imp[1] if imp is not None else float("nan"),
        "impact_z": imp[2] if imp is not None else float("nan"),
        "impact_time": pred.impact_time if pred.impact_time is not None else float("nan"),
        "impact_found": imp is not None,
        "mode": pred.mode,
        "n_updates": pred.n_updates,
    })
    ctx.wrote(ctx.path("prediction.csv"), ctx.path("impact.txt"))


def _eval_artifacts(ctx: Context) -> None:
    """Score detections and the impact forecast against simulator truth.

    A window is scored when the true ball depth at its midpoint lies inside
    the detector's depth gates and the window ends before the first bounce.
    """
    eps = float(ctx.cfg.get("eval", "eps", D.DETECTION_EPS_PX))
    det_path, track_path = ctx.path("detections.csv"), ctx.path("cam_track.csv")
    if det_path.exists() and track_path.exists():
        dets = read_rows(ctx.need(det_path))
        track = np.array([[float(r["t_us"]), float(r["u"]), float(r["v"]), float(r["pz"])]
                          for r in read_rows(ctx.need(track_path))])
        step = float(detection_params(ctx.cfg).window_dt) * 1e6
        t_impact = np.inf
        if ctx.path("ground_truth.txt").exists():
            t_impact = float(read_kv(ctx.path("ground_truth.txt"))["impact_time"]) * 1e6
            t_impact = np.inf if np.isnan(t_impact) else t_impact
        ball = read_rows(ctx.path("ball_events.csv")) if ctx.path("ball_events.csv").exists() else []
        t_mean: dict[int, list[int]] = {}
        for r in ball:
            t_mean.setdefault(int(r["window"]), []).append(int(r["t_us"]))
        n = succ = 0
        for d in dets:
            w = int(d["window"])
            t0 = float(d["t_start_us"])
            t_mid = t0 + 0.5 * step
            if len(track) == 0 or not (track[0, 0] <= t_mid <= track[-1, 0]):
                continue
            z = np.interp(t_mid, track[:, 0], track[:, 3])
            if not (D.GATE_DEPTH_NEAR <= z <= D.GATE_DEPTH_FAR) or t0 + step > t_impact:
                continue
            n += 1
            if d["found"] != "1" or w not in t_mean:
                continue
            t = float(np.mean(t_mean[w]))
            uv = np.array([np.interp(t, track[:, 0], track[:, 1]), np.interp(t, track[:, 0], track[:, 2])])
            err = float(np.hypot(float(d["cx"]) - uv[0], float(d["cy"]) - uv[1]))
            succ += err < eps
        write_report(ctx.path("detection_report.csv"), ("windows", "successes", "rate", "eps_px"),
                     [{"windows": n, "successes": succ, "rate": succ / n if n else float("nan"), "eps_px": eps}])
        ctx.wrote(ctx.path("detection_report.csv"))
    imp_path, gt_path = ctx.path("impact.txt"), ctx.path("ground_truth.txt")
    if imp_path.exists() and gt_path.exists():
        imp, gt = read_kv(ctx.need(imp_path)), read_kv(ctx.need(gt_path))
        e = float(np.hypot(float(imp["impact_x"]) - float(gt["impact_x"]),
                           float(imp["impact_y"]) - float(gt["impact_y"])))
        write_report(ctx.path("impact_report.csv"), ("mode", "n_updates", "error_m"),
                     [{"mode": imp.get("mode", ""), "n_updates": imp.get("n_updates", ""), "error_m": e}])
        ctx.wrote(ctx.path("impact_report.csv"))


def _eval_detection_protocol(ctx: Context) -> None:
    n = int(ctx.cfg.get("eval", "windows", 200))
    eps = float(ctx.cfg.get("eval", "eps", D.DETECTION_EPS_PX))
    samples = build_detection_dataset(n, seed=ctx.args.seed)
    base = detection_params(ctx.cfg)
    rows = []
    for th1 in (0.6, 0.8, 1.4):
        ev, _ = evaluate_samples(samples, dataclasses.replace(base, theta1=th1), eps)
        rows.append({"theta1": th1, "rate": ev.rate, "windows": len(ev)})
    write_report(ctx.path("detection_theta1_sweep.csv"), ("theta1", "rate", "windows"), rows)
    rows = []
    for use_roi in (True, False):
        ev, _ = evaluate_samples(samples, dataclasses.replace(base, use_roi=use_roi), eps)
        rows.append({"roi": use_roi, "rate": ev.rate, "windows": len(ev)})
    write_report(ctx.path("detection_roi_ablation.csv"), ("roi", "rate", "windows"), rows)
    ctx.wrote(ctx.path("detection_theta1_sweep.csv"), ctx.path("detection_roi_ablation.csv"))


def _eval_forecast_protocol(ctx: Context) -> None:
    proto = ForecastProtocol(n_trials=int(ctx.cfg.get("eval", "trials", 60)), seed=ctx.args.seed)
    cells = run_forecast_protocol(proto, forecast_config(ctx.cfg))
    rows = impact_rows(cells)
    fields = ("cell", "rmse_m", "std_m", "median_m", "n", "found")
    write_report(ctx.path("forecast_single_batch.csv"), fields, [r for r in rows if r["cell"].startswith("single")])
    write_report(ctx.path("forecast_online.csv"), fields, [r for r in rows if r["cell"].startswith("online")])
    curve = cells["online_curve"]
    write_report(ctx.path("online_curve.csv"), ("n_measurements", "median_error_m"),
                 [{"n_measurements": j + 2, "median_error_m": float(np.median(curve[:, j]))}
                  for j in range(curve.shape[1])])
    ctx.wrote(ctx.path("forecast_single_batch.csv"), ctx.path("forecast_online.csv"), ctx.path("online_curve.csv"))


def stage_eval(ctx: Context) -> None:
    proto = getattr(ctx.args, "protocol", None) or "none"
    scorable = [("detections.csv", "cam_track.csv"), ("impact.txt", "ground_truth.txt")]
    if proto == "none" and not any(all(ctx.path(n).exists() for n in pair) for pair in scorable):
        ctx.need(ctx.path("detections.csv"))  # raises the missing-input error
    _eval_artifacts(ctx)
    if proto in ("detection", "all"):
        _eval_detection_protocol(ctx)
    if proto in ("forecast", "all"):
        _eval_forecast_protocol(ctx)


def stage_bench(ctx: Context) -> None:
    n = max(100, int(getattr(ctx.args, "windows", None) or ctx.cfg.get("eval", "windows", 100)))
    samples = build_detection_dataset(n, seed=ctx.args.seed)
    rep = bench_latency(samples, detection_params(ctx.cfg), repeats=int(getattr(ctx.args, "repeats", 1) or 1))
    write_report(ctx.path("latency_breakdown.csv"), ("stage", "mean_ms", "std_ms", "share_pct"), latency_rows(rep))
    write_report(ctx.path("latency_roi_ablation.csv"), ("roi", "time_ms", "std_ms", "events"), roi_rows(rep))
    cam = camera_from(ctx.cfg)
    sensing_latency_grid(DEFAULT_GRID_DISTANCES, DEFAULT_GRID_SPEEDS, ctx.path("sensing_latency_grid.csv"),
                         f=cam.fx)
    ctx.wrote(ctx.path("latency_breakdown.csv"), ctx.path("latency_roi_ablation.csv"), ctx.path("sensing_latency_grid.csv"))


def stage_segment(ctx: Context) -> None:
    audio = getattr(ctx.args, "audio", None)
    if not audio:
        raise ConfigError("segment needs --audio")
    sec = ctx.cfg.section("segment")
    track = read_wav(ctx.need(audio))
    filt = highpass_filter(track, float(sec.get("cutoff", D.AUDIO_CUTOFF_HZ)), int(sec.get("order", D.AUDIO_ORDER)))
    peaks = find_peaks(filt, float(sec.get("min_separation", D.AUDIO_MIN_SEPARATION)),
                       float(sec.get("fraction", D.AUDIO_PEAK_FRACTION)))
    segs = segment_rallies(peaks, float(sec.get("hit_ratio", D.AUDIO_HIT_RATIO)),
                           reference_peak=bool(getattr(ctx.args, "reference_peak", False)))
    out = Path(getattr(ctx.args, "out", None) or ctx.path("segments.csv"))
    write_rows(out, ("segment", "t_s", "t_rel_s", "amplitude", "cycle"),
               [{"segment": i, "t_s": s.t, "t_rel_s": s.t_rel, "amplitude": s.amplitude, "cycle": s.cycle}
                for i, s in enumerate(segs)])
    write_rows(ctx.path("peaks.csv"), ("t_s", "index", "amplitude", "votes"),
               [{"t_s": p.t, "index": p.index, "amplitude": p.amplitude, "votes": p.votes} for p in peaks])
    ctx.wrote(out, ctx.path("peaks.csv"))


def stage_report(ctx: Context) -> None:
    """Summarise every CSV in the output directory (rows and columns)."""
    rows = []
    for p in sorted(ctx.out.glob("*.csv")):
        if p.name == "report.csv":
            continue
        data = read_rows(p)
        rows.append({"file": p.name, "rows": len(data), "columns": " ".join(data[0].keys()) if data else ""})
    write_report(ctx.path("report.csv"), ("file", "rows", "columns"), rows)
    ctx.wrote(ctx.path("report.csv"))


STAGE_FUNCS: dict[str, Callable[[Context], None]] = {
    "simulate": stage_simulate,
    "detect": stage_detect,
    "measure": stage_measure,
    "predict": stage_predict,
    "eval": stage_eval,
    "bench": stage_bench,
    "segment": stage_segment,
    "report": stage_report,
}


def run_pipeline(ctx: Context, stages: Sequence[str]) -> None:
    """Run ``stages`` in dependency order and write the manifest."""
    bad = [s for s in stages if s not in STAGE_FUNCS]
    if bad:
        raise ConfigError("unknown stages: " + ", ".join(bad))
    ordered = sorted(set(stages), key=STAGE_ORDER.index)
    for s in ordered:
        log.info("stage %s", s)
        STAGE_FUNCS[s](ctx)
    write_manifest(ctx, ordered)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_flags(top: bool) -> argparse.ArgumentParser:
    """Global flags; subcommand copies use SUPPRESS so they don't reset values given earlier."""
    def d(value):
        return value if top else argparse.SUPPRESS

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=d(None), help="key = value config file")
    common.add_argument("--seed", type=int, default=d(0))
    common.add_argument("--out-dir", default=d("."), help="directory for inputs and outputs")
    common.add_argument("--threads", type=int, default=d(1), help="upper bound on worker threads")
    common.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="egopong", description="Event-based ball detection and trajectory forecasting.",
                parents=[_common_flags(True)])
    common = _common_flags(False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("simulate", parents=[common], help="render a seeded synthetic serve")
    s.add_argument("--binary", action="store_true", help="write events.bin instead of events.csv")
    s = sub.add_parser("detect", parents=[common], help="detect the ball in 5 ms windows")
    s.add_argument("--events")
    s.add_argument("--gaze")
    s.add_argument("--imu")
    sub.add_parser("measure", parents=[common], help="fit circles and depth per window")
    s = sub.add_parser("predict", parents=[common], help="forecast the trajectory and impact point")
    s.add_argument("--mode", choices=("raw", "ekf"))
    s.add_argument("--online", action="store_true")
    s = sub.add_parser("eval", parents=[common], help="score run artifacts and run protocols")
    s.add_argument("--protocol", choices=("none", "detection", "forecast", "all"), default="none")
    s = sub.add_parser("bench", parents=[common], help="latency breakdown and ROI ablation")
    s.add_argument("--windows", type=int)
    s.add_argument("--repeats", type=int, default=1)
    s = sub.add_parser("segment", parents=[common], help="segment rallies from audio")
    s.add_argument("--audio")
    s.add_argument("--out")
    s.add_argument("--reference-peak", action="store_true", help="treat the first peak as the reference bounce")
    sub.add_parser("report", parents=[common], help="summarise outputs")
    s = sub.add_parser("run", parents=[common], help="run several stages in order")
    s.add_argument("stages", nargs="*")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        cfg = load_config(args.config)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ctx = Context(args, cfg, out)
        stages = args.stages if args.command == "run" else [args.command]
        run_pipeline(ctx, stages)
    except ConfigError as exc:
        print(f"egopong: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"egopong: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, EgopongError) as exc:
        print(f"egopong: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
