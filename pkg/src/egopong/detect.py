"""Foveated ball detection on a window of events.

Stages, each timed with a monotonic clock:

1. ``crop``: keep events in a ``w x w`` box around the gaze point.
2. ``motion_comp``: rotate event coordinates back to the window start with
   the mean gyro rate and accumulate the mean-timestamp image.
3. ``threshold``: ``rho > theta0 + theta1 |w|`` followed by a binary median
   (majority) filter; events on surviving pixels form the dynamic set.
4. ``cluster``: DBSCAN over normalised ``(t, x, y)``, convex hull per
   cluster, perimeter/area gating and selection of the most circular hull.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from . import defaults as D
from .core import AngularRate, CameraModel, ConfigError, DataError, EventWindow, GazePoint, undistort
from .measure import SingularSystemError, best_triple, fit_circle_3pt

log = logging.getLogger(__name__)

STAGES = ("crop", "motion_comp", "threshold", "cluster")


class MissingImuError(DataError):
    pass


class EmptyImageError(DataError):
    pass


def geometry_gates(cam: CameraModel, radius_m: float = D.BALL_RADIUS, z_near: float = D.GATE_DEPTH_NEAR,
                   z_far: float = D.GATE_DEPTH_FAR) -> tuple[tuple[float, float], tuple[float, float]]:
    """Perimeter and area gates from the ball's projected size range.

    A hull over the dynamic pixels of one window is often a partial disc
    (the leading crescent), so the lower bounds allow a half disc and the
    upper bounds allow two pixels of blur.
    """
    r_min = cam.fx * radius_m / z_far
    r_max = cam.fx * radius_m / z_near
    perim = (math.pi * r_min * 0.6, 2.0 * math.pi * (r_max + 2.0))
    area = (0.1 * math.pi * r_min**2, math.pi * (r_max + 2.0) ** 2)
    return perim, area


@dataclass(frozen=True)
class DetectionParams:
    window_dt: float = D.WINDOW_DT
    roi_w: int = D.ROI_W
    theta0: float = D.THETA0
    theta1: float = D.THETA1
    median_kernel: int = D.MEDIAN_KERNEL
    dbscan_eps: float = D.DBSCAN_EPS
    dbscan_min_pts: int = D.DBSCAN_MIN_PTS
    perim_bounds: tuple[float, float] | None = None
    area_bounds: tuple[float, float] | None = None
    use_roi: bool = True
    time_norm: str = "observed"  # or "window"

    def __post_init__(self) -> None:
        if not self.window_dt > 0:
            raise ConfigError("window_dt must be positive")
        if self.roi_w <= 0 or self.roi_w % 2:
            raise ConfigError("roi_w must be positive and even")
        if self.median_kernel < 1 or self.median_kernel % 2 == 0:
            raise ConfigError("median_kernel must be a positive odd integer")
        if self.dbscan_eps <= 0 or self.dbscan_min_pts < 1:
            raise ConfigError("DBSCAN parameters must be positive")
        for name in ("perim_bounds", "area_bounds"):
            b = getattr(self, name)
            if b is not None and not (0 < b[0] < b[1]):
                raise ConfigError(f"{name} must satisfy 0 < min < max")
        if self.time_norm not in ("observed", "window"):
            raise ConfigError("time_norm must be 'observed' or 'window'")

    def gates(self, cam: CameraModel) -> tuple[tuple[float, float], tuple[float, float]]:
        perim, area = geometry_gates(cam)
        return (self.perim_bounds or perim), (self.area_bounds or area)


@dataclass(frozen=True)
class TimestampImage:
    """Mean-timestamp image over the full sensor.

    ``mean_t`` and ``rho`` are only meaningful where ``count > 0`` (they hold
    zero elsewhere); ``pixels`` lists the touched pixels as linear indices
    ``y * width + x``.
    """

    mean_t: np.ndarray  # (H, W) mean relative time in us
    count: np.ndarray  # (H, W) int
    rho: np.ndarray  # (H, W) in [0, 1]
    pixels: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.count > 0


@dataclass(frozen=True)
class Cluster:
    members: np.ndarray  # indices into the dynamic event set
    points: np.ndarray  # unique 2D pixels (time collapsed)
    hull: np.ndarray  # hull vertices
    perimeter: float
    area: float
    gamma: float

    @property
    def n_events(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ClusterReport:
    clusters: list[Cluster]
    selected: int | None = None


@dataclass
class DetectionResult:
    found: bool
    reason: str
    center: np.ndarray | None = None
    radius: float | None = None
    gamma: float | None = None
    t_us: float | None = None
    ball_events: EventWindow | None = None
    report: ClusterReport | None = None
    omega_bar: np.ndarray | None = None
    n_input: int = 0
    n_processed: int = 0
    n_dynamic: int = 0
    timings_us: dict = field(default_factory=lambda: {s: 0.0 for s in STAGES})

    @property
    def total_us(self) -> float:
        return float(sum(self.timings_us.values()))


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def nearest_gaze(gaze: np.ndarray, t_us: float) -> GazePoint:
    """Gaze sample closest in time to ``t_us``; ``gaze`` rows are ``t_us, x, y``."""
    gaze = np.asarray(gaze, dtype=float).reshape(-1, 3)
    if len(gaze) == 0:
        raise DataError("empty gaze track")
    k = int(np.argmin(np.abs(gaze[:, 0] - t_us)))
    return GazePoint(int(gaze[k, 0]), float(gaze[k, 1]), float(gaze[k, 2]))


def roi_box(gaze: GazePoint, w: int, cam: CameraModel) -> tuple[float, float, float, float]:
    """Half-open box ``[x0, x1) x [y0, y1)`` of side ``w``, clamped to the sensor."""
    h = w / 2.0
    x0, x1 = max(gaze.x_et - h, 0.0), min(gaze.x_et + h, float(cam.width))
    y0, y1 = max(gaze.y_et - h, 0.0), min(gaze.y_et + h, float(cam.height))
    return x0, x1, y0, y1


def crop_roi(win: EventWindow, gaze: GazePoint, params: DetectionParams, cam: CameraModel) -> EventWindow:
    x0, x1, y0, y1 = roi_box(gaze, params.roi_w, cam)
    mask = (win.x >= x0) & (win.x < x1) & (win.y >= y0) & (win.y < y1)
    return win.subset(mask)


def mean_angular_rate(imu: np.ndarray, t_start_us: float, t_end_us: float) -> np.ndarray:
    """Mean of gyro samples with ``t_start <= t <= t_end``.

    Raises:
        MissingImuError: if no sample overlaps the window.
    """
    imu = np.asarray(imu, dtype=float).reshape(-1, 4)
    sel = (imu[:, 0] >= t_start_us) & (imu[:, 0] <= t_end_us)
    if not np.any(sel):
        raise MissingImuError(f"no gyro samples in [{t_start_us}, {t_end_us}] us")
    return imu[sel, 1:].mean(axis=0)


def compensate_coords(xy: np.ndarray, dt_s: np.ndarray, omega: np.ndarray, cam: CameraModel) -> np.ndarray:
    """``x_mc = K (I - [w]x dt) K^-1 x`` per event, dehomogenised."""
    xy = np.asarray(xy, dtype=float)
    if cam.has_distortion:
        xy = undistort(xy, cam)
    w = np.asarray(omega, dtype=float)
    if not np.any(w):
        return xy.copy()
    bx = (xy[:, 0] - cam.cx) / cam.fx
    by = (xy[:, 1] - cam.cy) / cam.fy
    # (I - [w]x dt) applied to (bx, by, 1)
    wx, wy, wz = np.outer(np.atleast_1d(dt_s), w).T
    qx = bx + wz * by - wy
    qy = by - wz * bx + wx
    qz = 1.0 - wx * by + wy * bx
    return np.column_stack([cam.fx * qx / qz + cam.cx, cam.fy * qy / qz + cam.cy])


def motion_compensate(win: EventWindow, imu, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Compensated float coordinates and the mean angular rate.

    ``imu`` is either an ``(I, 4)`` array of ``t_us, wx, wy, wz`` rows, which
    is filtered to the window, or a sequence of :class:`AngularRate` already
    known to overlap it.
    """
    if len(imu) and isinstance(imu[0], AngularRate):
        omega = np.mean([w.as_array() for w in imu], axis=0)
    else:
        omega = mean_angular_rate(imu, win.t_start, win.t_end)
    dt_s = (win.t - win.t_start) * 1e-6
    return compensate_coords(win.xy(), dt_s, omega, cam), omega


def build_timestamp_image(xy_mc: np.ndarray, t_rel_us: np.ndarray, cam: CameraModel) -> TimestampImage:
    """Mean relative timestamp per pixel over the full sensor plane.

    Compensated coordinates are binned by rounding; events landing outside
    the sensor are dropped. ``rho`` is ``T / max T`` (zero if ``max T = 0``).

    Raises:
        EmptyImageError: if no event lands on the sensor.
    """
    if len(xy_mc) == 0:
        raise EmptyImageError("no events")
    px = np.rint(xy_mc).astype(np.int64)
    on = (px[:, 0] >= 0) & (px[:, 0] < cam.width) & (px[:, 1] >= 0) & (px[:, 1] < cam.height)
    if not np.any(on):
        raise EmptyImageError("all compensated events fall outside the sensor")
    lin = px[on, 1] * cam.width + px[on, 0]
    n = cam.width * cam.height
    count = np.bincount(lin, minlength=n)
    total = np.bincount(lin, weights=np.asarray(t_rel_us, dtype=float)[on], minlength=n)
    mean_t = np.divide(total, count, out=np.zeros(n), where=count > 0)
    t_max = float(mean_t.max())
    rho = mean_t / t_max if t_max > 0 else np.zeros(n)
    shape = (cam.height, cam.width)
    return TimestampImage(mean_t.reshape(shape), count.reshape(shape), rho.reshape(shape), np.unique(lin))


def threshold_dynamic(img: TimestampImage, omega_bar, params: DetectionParams) -> np.ndarray:
    """Binary map ``rho > theta0 + theta1 |w|``, then a ``k x k`` median filter.

    For a binary image the median is a majority vote. Only touched pixels can
    pass the threshold, so the filter runs on the bounding box of positives
    (zero padding outside the sensor).
    """
    thr = params.theta0 + params.theta1 * float(np.linalg.norm(omega_bar))
    H, W = img.count.shape
    pos = img.pixels[img.rho.ravel()[img.pixels] > thr]
    out = np.zeros((H, W), dtype=bool)
    if len(pos) == 0:
        return out
    rows, cols = np.divmod(pos, W)
    k = params.median_kernel
    if k == 1:
        out[rows, cols] = True
        return out
    h = k // 2
    r0, c0 = rows.min(), cols.min()
    r1, c1 = rows.max() + 1, cols.max() + 1
    # outside the bounding box fewer than half of any k x k window can be set
    sub = np.zeros((r1 - r0 + 2 * h, c1 - c0 + 2 * h), dtype=np.int32)
    sub[rows - r0 + h, cols - c0 + h] = 1
    ii = np.zeros((sub.shape[0] + 1, sub.shape[1] + 1), dtype=np.int32)
    ii[1:, 1:] = sub.cumsum(0).cumsum(1)
    box = ii[k:, k:] - ii[:-k, k:] - ii[k:, :-k] + ii[:-k, :-k]
    out[r0:r1, c0:c1] = box > (k * k) // 2
    return out


def _components(n: int, edges: np.ndarray) -> np.ndarray:
    """Connected-component labels (minimum member index) by label propagation."""
    lab = np.arange(n)
    if len(edges) == 0:
        return lab
    a, b = edges[:, 0], edges[:, 1]
    while True:
        new = lab.copy()
        np.minimum.at(new, a, lab[b])
        np.minimum.at(new, b, lab[a])
        new = new[new]  # pointer jumping
        if np.array_equal(new, lab):
            return lab
        lab = new


def dbscan(features: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """DBSCAN labels (``-1`` = noise) using Euclidean distance.

    Core points have at least ``min_pts`` neighbours within ``eps``
    (counting themselves). Clusters are connected components of core points,
    numbered by their lowest member index; a border point joins the cluster
    of its lowest-index core neighbour.
    """
    n = len(features)
    labels = -np.ones(n, dtype=np.int64)
    if n == 0:
        return labels
    pairs = cKDTree(features).query_pairs(eps, output_type="ndarray")
    deg = 1 + np.bincount(pairs.ravel(), minlength=n)
    core = deg >= min_pts
    if not core.any():
        return labels
    comp = _components(n, pairs[core[pairs[:, 0]] & core[pairs[:, 1]]])
    roots = np.unique(comp[core])
    remap = -np.ones(n, dtype=np.int64)
    remap[roots] = np.arange(len(roots))
    labels[core] = remap[comp[core]]
    mixed = pairs[core[pairs[:, 0]] ^ core[pairs[:, 1]]]
    if len(mixed):
        c = np.where(core[mixed[:, 0]], mixed[:, 0], mixed[:, 1])
        b = np.where(core[mixed[:, 0]], mixed[:, 1], mixed[:, 0])
        order = np.lexsort((c, b))
        b, c = b[order], c[order]
        keep = np.r_[True, b[1:] != b[:-1]]
        labels[b[keep]] = labels[c[keep]]
    return labels


def unique_points(points) -> np.ndarray:
    """Unique rows of an ``(n, 2)`` array, sorted lexicographically."""
    raw = np.asarray(points).reshape(-1, 2)
    if raw.dtype.kind in "iu" and len(raw):
        key = (raw[:, 0].astype(np.int64) << 21) + raw[:, 1].astype(np.int64) + 2**20
        _, first = np.unique(key, return_index=True)
        return raw[first].astype(float)
    pts = raw.astype(float)
    if len(pts) and np.all(pts == np.rint(pts)) and np.abs(pts).max() < 2**20:
        key = (pts[:, 0].astype(np.int64) << 21) + pts[:, 1].astype(np.int64) + 2**20
        _, first = np.unique(key, return_index=True)
        return pts[first]
    return np.unique(pts, axis=0)


def hull_shape(points: np.ndarray, assume_unique: bool = False) -> tuple[np.ndarray, float, float, float]:
    """Hull vertices, perimeter, area and circularity ``P^2 / (4 pi A)``.

    Degenerate point sets (fewer than three distinct or collinear) get zero
    area and infinite circularity.
    """
    pts = np.asarray(points, dtype=float) if assume_unique else unique_points(points)
    if len(pts) < 3:
        return pts, 0.0, 0.0, math.inf
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return pts, 0.0, 0.0, math.inf
    # in 2D qhull reports perimeter as "area" and area as "volume"
    perim, area = float(hull.area), float(hull.volume)
    if area <= 0:
        return pts[hull.vertices], perim, 0.0, math.inf
    return pts[hull.vertices], perim, area, perim * perim / (4.0 * math.pi * area)


def bbox_rejects(points: np.ndarray, perim_bounds, area_bounds) -> bool:
    """True if no convex set inside the points' bounding box can pass the gates.

    A convex set of diameter ``D`` spanning a ``w x h`` box has perimeter in
    ``[2 max(w, h), 2 (w + h)]`` and area at most ``w h``.
    """
    w, h = np.ptp(points, axis=0)
    (p_lo, p_hi), (a_lo, _) = perim_bounds, area_bounds
    return 2.0 * max(w, h) > p_hi or 2.0 * (w + h) < p_lo or w * h < a_lo


def cluster_dynamic(t_us: np.ndarray, x: np.ndarray, y: np.ndarray, params: DetectionParams,
                    cam: CameraModel, window: tuple[int, int] | None = None) -> ClusterReport:
    """DBSCAN on ``(t, x / width, y / height)`` with time min-max scaled."""
    t = np.asarray(t_us, dtype=float)
    if len(t) == 0:
        return ClusterReport([])
    if params.time_norm == "window" and window is not None:
        lo, hi = float(window[0]), float(window[1])
    else:
        lo, hi = float(t.min()), float(t.max())
    tn = (t - lo) / (hi - lo) if hi > lo else np.zeros_like(t)
    feats = np.column_stack([tn, np.asarray(x, float) / cam.width, np.asarray(y, float) / cam.height])
    labels = dbscan(feats, params.dbscan_eps, params.dbscan_min_pts)
    perim_bounds, area_bounds = params.gates(cam)
    clusters = []
    if labels.max() < 0:
        return ClusterReport(clusters)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(labels.max() + 2))
    for lab in range(labels.max() + 1):
        members = order[bounds[lab]:bounds[lab + 1]]
        pts = unique_points(np.column_stack([x[members], y[members]]))
        if bbox_rejects(pts, perim_bounds, area_bounds):
            # cannot pass the gates; skip the hull and mark as not evaluated
            clusters.append(Cluster(members, pts, pts[:0], math.nan, math.nan, math.inf))
            continue
        hull, perim, area, gamma = hull_shape(pts, assume_unique=True)
        clusters.append(Cluster(members, pts, hull, perim, area, gamma))
    return ClusterReport(clusters)


def select_ball(report: ClusterReport, params: DetectionParams, cam: CameraModel) -> int | None:
    """Index of the gated cluster with the smallest circularity.

    Ties go to the cluster with more events, then to the smaller hull
    centroid (lexicographic) so the choice does not depend on list order.
    """
    (p_lo, p_hi), (a_lo, a_hi) = params.gates(cam)
    best, best_key = None, None
    for i, c in enumerate(report.clusters):
        if not (p_lo <= c.perimeter <= p_hi and a_lo <= c.area <= a_hi):
            continue
        centroid = c.points.mean(axis=0)
        key = (c.gamma, -c.n_events, float(centroid[0]), float(centroid[1]))
        if best_key is None or key < best_key:
            best, best_key = i, key
    return best


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def _ball_center(hull: np.ndarray, r_cap: float) -> tuple[np.ndarray, float]:
    """Tri-point circle on the cluster hull; hull centroid if implausible."""
    if len(hull) >= 3:
        best = best_triple(hull)
        try:
            fit = fit_circle_3pt(*hull[best])
            if fit.radius <= r_cap:
                return fit.center, fit.radius
        except SingularSystemError:
            pass
    c = hull.mean(axis=0)
    return c, float(np.max(np.linalg.norm(hull - c, axis=1)))


def detect(win: EventWindow, gaze, imu, cam: CameraModel, params: DetectionParams | None = None) -> DetectionResult:
    """Run the full detection stack on one window.

    ``gaze`` is an ``(G, 3)`` track or a single :class:`GazePoint`; ``imu`` is
    an ``(I, 4)`` gyro track. Failures are reported through ``reason``.
    """
    params = params or DetectionParams()
    res = DetectionResult(False, "ok", n_input=len(win))
    clock = time.perf_counter_ns

    t0 = clock()
    if params.use_roi:
        g = gaze if isinstance(gaze, GazePoint) else nearest_gaze(gaze, 0.5 * (win.t_start + win.t_end))
        work = crop_roi(win, g, params, cam)
    else:
        work = win
    t1 = clock()
    res.timings_us["crop"] = (t1 - t0) / 1e3
    res.n_processed = len(work)
    if len(work) == 0:
        res.reason = "empty_roi" if len(win) else "no_events"
        return res

    try:
        xy_mc, omega = motion_compensate(work, imu, cam)
        img = build_timestamp_image(xy_mc, work.t - work.t_start, cam)
    except MissingImuError:
        res.reason = "missing_imu"
        return res
    except EmptyImageError:
        res.reason = "empty_image"
        return res
    res.omega_bar = omega
    t2 = clock()
    res.timings_us["motion_comp"] = (t2 - t1) / 1e3

    B = threshold_dynamic(img, omega, params)
    px = np.rint(xy_mc).astype(np.int64)
    on = (px[:, 0] >= 0) & (px[:, 0] < cam.width) & (px[:, 1] >= 0) & (px[:, 1] < cam.height)
    dyn = np.zeros(len(work), dtype=bool)
    dyn[on] = B[px[on, 1], px[on, 0]]
    dyn_idx = np.flatnonzero(dyn)
    t3 = clock()
    res.timings_us["threshold"] = (t3 - t2) / 1e3
    res.n_dynamic = len(dyn_idx)
    if len(dyn_idx) == 0:
        res.reason = "no_dynamic"
        return res

    report = cluster_dynamic(work.t[dyn_idx], work.x[dyn_idx], work.y[dyn_idx], params, cam,
                             (work.t_start, work.t_end))
    sel = select_ball(report, params, cam) if report.clusters else None
    report = ClusterReport(report.clusters, sel)
    res.report = report
    if sel is not None:
        c = report.clusters[sel]
        (_, p_hi), _ = params.gates(cam)
        center, radius = _ball_center(c.hull, p_hi / (2 * math.pi))
        members = dyn_idx[c.members]
        res.found, res.center, res.radius, res.gamma = True, center, radius, c.gamma
        res.ball_events = work.subset(members)
        res.t_us = float(np.mean(work.t[members]))
    t4 = clock()
    res.timings_us["cluster"] = (t4 - t3) / 1e3
    if not report.clusters:
        res.reason = "no_cluster"
    elif sel is None:
        res.reason = "gated_out"
    return res


def iter_windows(stream: EventWindow, dt_s: float = D.WINDOW_DT):
    """Tile a stream into consecutive half-open windows of ``dt_s`` seconds."""
    step = int(round(dt_s * 1e6))
    if step <= 0:
        raise ConfigError("window duration must be positive")
    t = stream.t_start
    while t < stream.t_end:
        yield stream.slice_time(t, min(t + step, stream.t_end))
        t += step
