"""Evaluation protocol: detection rate, impact error, latency, sensing latency.

The protocol runners build seeded synthetic datasets once and evaluate
several pipeline configurations on identical inputs, so ablations are paired.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import defaults as D
from .core import BehindCameraError, DataError, camera_to_world_rotation, project
from .detect import DetectionParams, DetectionResult, detect
from .io import write_rows
from .predict import (
    ForecastConfig,
    TrajectoryPrediction,
    forecast_online,
    forecast_single_batch,
    impact_or_last,
)
from .synth import (
    GroundTruth,
    RenderedScene,
    SceneConfig,
    ball_camera_track,
    ground_truth_measurements,
    random_forecast_scene,
    random_serve_scene,
    render_events,
    sample_windows,
    simulate_flight,
    synthesize_measurements,
)

log = logging.getLogger(__name__)

PROCESSING_STAGES = ("motion_comp", "threshold", "cluster")


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DetectionEval:
    errors: np.ndarray  # px; inf where nothing was detected
    eps: float = D.DETECTION_EPS_PX

    @property
    def success(self) -> np.ndarray:
        return self.errors < self.eps

    @property
    def rate(self) -> float:
        return float(np.mean(self.success)) if len(self.errors) else 0.0

    def __len__(self) -> int:
        return len(self.errors)


def gt_reprojector(gt: GroundTruth, cfg: SceneConfig) -> Callable[[float], np.ndarray]:
    """Map a time in seconds to the ground-truth ball centre in pixels."""

    def uv(t_s: float) -> np.ndarray:
        return project(ball_camera_track(gt, cfg, np.atleast_1d(float(t_s)))[0], cfg.cam)

    return uv


def detection_error(result: DetectionResult, reproject: Callable[[float], np.ndarray]) -> float:
    if not result.found:
        return math.inf
    try:
        return float(np.linalg.norm(result.center - reproject(result.t_us * 1e-6)))
    except BehindCameraError:
        return math.inf


def eval_detection(detections: Sequence[DetectionResult], reprojectors: Sequence[Callable] | Callable,
                   eps: float = D.DETECTION_EPS_PX) -> DetectionEval:
    """Success iff the detected centre is within ``eps`` px (strict) of the GT."""
    if callable(reprojectors):
        reprojectors = [reprojectors] * len(detections)
    if len(reprojectors) != len(detections):
        raise DataError("one reprojector per detection is required")
    errs = np.array([detection_error(d, r) for d, r in zip(detections, reprojectors)], dtype=float)
    return DetectionEval(errs, eps)


@dataclass(frozen=True)
class DetectionSample:
    """One rendered window with its ground truth."""

    cfg: SceneConfig
    gt: GroundTruth
    t0: float
    scene: RenderedScene

    def reprojector(self) -> Callable[[float], np.ndarray]:
        return gt_reprojector(self.gt, self.cfg)


def build_detection_dataset(n_windows: int = 200, seed: int = 5, windows_per_scene: int = 4,
                            dt: float = D.WINDOW_DT, **scene_overrides) -> list[DetectionSample]:
    """Seeded cluttered windows from random serves with head rotation."""
    rng = np.random.default_rng(seed)
    out: list[DetectionSample] = []
    while len(out) < n_windows:
        cfg = random_serve_scene(rng, **scene_overrides)
        gt = simulate_flight(cfg)
        k = min(windows_per_scene, n_windows - len(out))
        for t0 in sample_windows(gt, cfg, rng, k, dt):
            scene = render_events(gt, cfg, (float(t0), float(t0) + dt))
            out.append(DetectionSample(cfg, gt, float(t0), scene))
    return out


def run_detection(samples: Sequence[DetectionSample], params: DetectionParams | None = None) -> list[DetectionResult]:
    params = params or DetectionParams()
    return [detect(s.scene.events, s.scene.gaze, s.scene.imu, s.cfg.cam, params) for s in samples]


def evaluate_samples(samples: Sequence[DetectionSample], params: DetectionParams | None = None,
                     eps: float = D.DETECTION_EPS_PX) -> tuple[DetectionEval, list[DetectionResult]]:
    results = run_detection(samples, params)
    return eval_detection(results, [s.reprojector() for s in samples], eps), results


# ---------------------------------------------------------------------------
# Impact error
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImpactEval:
    errors: np.ndarray  # planar error per trajectory, metres
    found: np.ndarray  # impact found inside the horizon

    @property
    def rmse(self) -> float:
        return float(np.sqrt(np.mean(self.errors**2))) if len(self.errors) else math.nan

    @property
    def sigma(self) -> float:
        return float(np.std(self.errors)) if len(self.errors) else math.nan

    @property
    def median(self) -> float:
        return float(np.median(self.errors)) if len(self.errors) else math.nan


def eval_impact(predictions: Sequence[TrajectoryPrediction], gt_points: Sequence[np.ndarray]) -> ImpactEval:
    """Planar ``(x, y)`` error of predicted vs true impact points.

    A prediction without a table crossing inside its horizon is scored at its
    final propagated position.
    """
    if len(predictions) != len(gt_points):
        raise DataError("one ground-truth impact per prediction is required")
    errs, found = [], []
    for pred, gp in zip(predictions, gt_points):
        if gp is None:
            raise DataError("ground truth has no impact point")
        ip, ok = impact_or_last(pred)
        errs.append(float(np.linalg.norm(np.asarray(ip)[:2] - np.asarray(gp)[:2])))
        found.append(ok)
    return ImpactEval(np.array(errs), np.array(found, dtype=bool))


@dataclass(frozen=True)
class ForecastTrial:
    cfg: SceneConfig
    gt: GroundTruth
    t_start: float
    t_stop: float


@dataclass(frozen=True)
class ForecastProtocol:
    """Timing and noise of the synthetic forecasting study.

    Measurements start ``lead`` seconds before the true impact; the online
    stream stops ``stop_before`` seconds before it.
    """

    n_trials: int = 60
    seed: int = 1
    lead: float = 0.18
    stop_before: float = 0.05
    center_sigma: float = 0.5  # px
    radius_sigma: float = 0.25  # px
    fast_rate: float = 200.0
    slow_rate: float = 30.0
    batch_spans: tuple[float, ...] = (0.010, 0.020, 0.033)
    checkpoints: tuple[int, ...] = (2, 4, 8, 16)


def build_forecast_trials(proto: ForecastProtocol) -> list[ForecastTrial]:
    rng = np.random.default_rng(proto.seed)
    out = []
    for _ in range(proto.n_trials):
        cfg, gt = random_forecast_scene(rng)
        out.append(ForecastTrial(cfg, gt, gt.impact_time - proto.lead, gt.impact_time - proto.stop_before))
    return out


def run_forecast_protocol(proto: ForecastProtocol | None = None,
                          config: ForecastConfig | None = None) -> dict[str, object]:
    """All forecasting cells on shared trials.

    Returns a mapping from cell name to :class:`ImpactEval`, plus
    ``"online_curve"``: an ``(n_trials, n_updates)`` array of impact errors of
    the 200 Hz EKF online predictions after each update.
    """
    proto = proto or ForecastProtocol()
    trials = build_forecast_trials(proto)
    cells: dict[str, list[TrajectoryPrediction]] = {}
    curves = []
    gts = [tr.gt.impact_point for tr in trials]

    def add(name: str, pred: TrajectoryPrediction) -> None:
        cells.setdefault(name, []).append(pred)

    for k, tr in enumerate(trials):
        cfg, gt = tr.cfg, tr.gt
        R = camera_to_world_rotation(cfg.mount_pitch)
        noise = np.random.default_rng([proto.seed, k])
        kw = dict(physics=cfg.physics, cam=cfg.cam, cam_to_world=R, config=config)

        def noisy(rate: float, t_last: float):
            return synthesize_measurements(gt, cfg, rate, tr.t_start, t_last, proto.center_sigma,
                                           proto.radius_sigma, noise)

        fast, slow = noisy(proto.fast_rate, tr.t_stop), noisy(proto.slow_rate, tr.t_stop)
        exact = ground_truth_measurements(gt, cfg, proto.fast_rate, tr.t_start, tr.t_stop)
        on_fast = forecast_online(fast, mode="ekf", **kw)
        curves.append([float(np.linalg.norm(impact_or_last(p)[0][:2] - gt.impact_point[:2])) for p in on_fast])
        add("online_200_ekf", on_fast[-1])
        add("online_200_raw", forecast_online(fast, mode="raw", **kw)[-1])
        add("online_30_ekf", forecast_online(slow, mode="ekf", **kw)[-1])
        add("online_30_raw", forecast_online(slow, mode="raw", **kw)[-1])
        add("online_200_ekf_gt", forecast_online(exact, mode="ekf", **kw)[-1])
        for span in proto.batch_spans:
            batch = noisy(proto.fast_rate, tr.t_start + span)
            exact_b = ground_truth_measurements(gt, cfg, proto.fast_rate, tr.t_start, tr.t_start + span)
            for mode in ("raw", "ekf"):
                add(f"single_{int(round(span * 1e3))}ms_{mode}", forecast_single_batch(batch, mode=mode, **kw))
            for mode in ("raw", "ekf"):
                add(f"single_{int(round(span * 1e3))}ms_{mode}_gt", forecast_single_batch(exact_b, mode=mode, **kw))
    out: dict[str, object] = {name: eval_impact(preds, gts) for name, preds in cells.items()}
    n = min(len(c) for c in curves)
    out["online_curve"] = np.array([c[:n] for c in curves])
    return out


def checkpoint_medians(curve: np.ndarray, checkpoints: Iterable[int]) -> list[tuple[int, float]]:
    """Median error after ``k`` measurements for each checkpoint ``k``.

    Column ``j`` of ``curve`` holds the prediction made with ``j + 2``
    measurements.
    """
    out = []
    for k in checkpoints:
        j = k - 2
        if 0 <= j < curve.shape[1]:
            out.append((k, float(np.median(curve[:, j]))))
    out.append((curve.shape[1] + 1, float(np.median(curve[:, -1]))))
    return out


# ---------------------------------------------------------------------------
# Latency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StageStats:
    mean_ms: float
    std_ms: float
    share_pct: float


@dataclass(frozen=True)
class LatencyReport:
    roi: dict[str, StageStats]
    no_roi: dict[str, StageStats]
    roi_total_ms: tuple[float, float]
    no_roi_total_ms: tuple[float, float]
    roi_events: np.ndarray
    no_roi_events: np.ndarray

    @property
    def reduction(self) -> float:
        return float(np.mean(self.no_roi_events) / max(np.mean(self.roi_events), 1e-12))


def _stage_stats(results: Sequence[DetectionResult]) -> tuple[dict[str, StageStats], tuple[float, float]]:
    T = np.array([[r.timings_us.get(s, 0.0) for s in PROCESSING_STAGES] for r in results]) / 1e3
    total = T.sum(axis=1)
    share = 100.0 * T.sum(axis=0) / max(T.sum(), 1e-12)
    stats = {s: StageStats(float(T[:, i].mean()), float(T[:, i].std()), float(share[i]))
             for i, s in enumerate(PROCESSING_STAGES)}
    crop = np.array([r.timings_us.get("crop", 0.0) for r in results]) / 1e3
    stats["crop"] = StageStats(float(crop.mean()), float(crop.std()), math.nan)
    return stats, (float((total + crop).mean()), float((total + crop).std()))


def bench_latency(samples: Sequence[DetectionSample], params: DetectionParams | None = None,
                  repeats: int = 1) -> LatencyReport:
    """Paired timing of the pipeline with and without ROI cropping.

    Both runs see the same windows; each window is run ``repeats`` times per
    mode, interleaved, and the fastest run is kept to damp scheduler noise.

    Raises:
        DataError: fewer than 100 windows.
    """
    if len(samples) < 100:
        raise DataError("latency benchmarking needs at least 100 windows")
    params = params or DetectionParams()
    on_p, off_p = replace(params, use_roi=True), replace(params, use_roi=False)
    on, off = [], []
    for s in samples:
        args = (s.scene.events, s.scene.gaze, s.scene.imu, s.cfg.cam)
        best_on = best_off = None
        for _ in range(max(1, repeats)):
            r_on = detect(*args, on_p)
            r_off = detect(*args, off_p)
            if best_on is None or r_on.total_us < best_on.total_us:
                best_on = r_on
            if best_off is None or r_off.total_us < best_off.total_us:
                best_off = r_off
        on.append(best_on)
        off.append(best_off)
    s_on, t_on = _stage_stats(on)
    s_off, t_off = _stage_stats(off)
    return LatencyReport(s_on, s_off, t_on, t_off, np.array([r.n_processed for r in on]),
                         np.array([r.n_processed for r in off]))


# ---------------------------------------------------------------------------
# Sensing latency
# ---------------------------------------------------------------------------


def sensing_latency(v_rel: float, d: float, r_o: float = D.BALL_RADIUS, f: float = D.FX, du: float = 1.0) -> float:
    """Time for an approaching object to grow by ``du`` pixels in the image.

    ``tau = du d^2 / (v (f r_o + du d))``.
    """
    vals = np.array([v_rel, d, r_o, f], dtype=float)
    if np.any(vals <= 0) or du < 0:
        raise DataError("sensing latency needs positive inputs")
    return du * d * d / (v_rel * (f * r_o + du * d))


def sensing_latency_grid(distances: Sequence[float], speeds: Sequence[float], path=None, r_o: float = D.BALL_RADIUS,
                         f: float = D.FX, du: float = 1.0) -> list[dict]:
    rows = [{"d_m": float(d), "v_mps": float(v), "tau_s": sensing_latency(v, d, r_o, f, du)}
            for d in distances for v in speeds]
    if path is not None:
        write_rows(path, ["d_m", "v_mps", "tau_s"], rows)
    return rows


DEFAULT_GRID_DISTANCES = tuple(np.round(np.arange(0.5, 4.01, 0.5), 3))
DEFAULT_GRID_SPEEDS = tuple(float(v) for v in range(2, 21, 2))


# ---------------------------------------------------------------------------
# Report tables
# ---------------------------------------------------------------------------


def latency_rows(report: LatencyReport) -> list[dict]:
    rows = []
    for s in PROCESSING_STAGES:
        st = report.roi[s]
        rows.append({"stage": s, "mean_ms": st.mean_ms, "std_ms": st.std_ms, "share_pct": st.share_pct})
    return rows


def roi_rows(report: LatencyReport) -> list[dict]:
    return [
        {"roi": 1, "time_ms": report.roi_total_ms[0], "std_ms": report.roi_total_ms[1],
         "events": float(np.mean(report.roi_events))},
        {"roi": 0, "time_ms": report.no_roi_total_ms[0], "std_ms": report.no_roi_total_ms[1],
         "events": float(np.mean(report.no_roi_events))},
    ]


def impact_rows(cells: dict[str, object]) -> list[dict]:
    rows = []
    for name in sorted(k for k in cells if isinstance(cells[k], ImpactEval)):
        ev = cells[name]
        rows.append({"cell": name, "rmse_m": ev.rmse, "std_m": ev.sigma, "median_m": ev.median,
                     "n": len(ev.errors), "found": int(ev.found.sum())})
    return rows


def write_report(path, fieldnames: Sequence[str], rows: Sequence[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_rows(path, fieldnames, rows)
    return path
