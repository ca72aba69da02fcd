"""Synthetic scenes with exact ground truth.

Ball flight is integrated with RK4 under gravity, quadratic drag and an
optional Magnus term; table bounces are located by bisection. Events are
rendered geometrically:

* the ball rim emits events at pixel centres at the instant the projected
  circle (optionally blurred into a ramp of ``edge_width`` px) crosses them,
  so the count per traversed pixel is ``contrast_event_density``;
* static edges, the opponent silhouette and circular decoys are curves that
  sweep across the sensor; they emit in proportion to their normal
  displacement;
* clutter is uniform over the sensor and the time axis.

Camera rotation follows a piecewise-constant angular-rate schedule. Sign
convention: a static bearing evolves as ``b(t) = exp([w]x t) b(0)`` in the
camera frame, which is the convention the motion compensation undoes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.spatial.transform import Rotation

from .core import (
    AngularRate,
    BallState,
    CameraModel,
    DataError,
    EventWindow,
    PhysicsParams,
    back_project,
    camera_to_world_rotation,
    project,
    undistort,
)

GT_RATE = 1000.0
BOUNCE_TOL_S = 1e-6


class InvalidSceneError(DataError):
    pass


class NoEventsError(DataError):
    pass


@dataclass(frozen=True)
class SceneConfig:
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    initial_state: BallState = field(
        default_factory=lambda: BallState(0.0, np.array([0.0, 2.7, -0.25]), np.array([0.0, -6.0, 1.0]))
    )
    cam: CameraModel = field(default_factory=CameraModel)
    imu_rate: float = 800.0
    gaze_rate: float = 60.0
    gaze_noise_sigma: float = 2.0
    clutter_rate: float = 20000.0
    # (start time s, AngularRate) pairs; each rate holds until the next start
    camera_rotation_profile: tuple = ((0.0, AngularRate(0.0, 0.0, 0.0)),)
    contrast_event_density: float = 6.0
    duration: float = 0.5
    seed: int = 0
    mount_pitch: float = 0.3
    edge_width: float = 1.0
    event_jitter_us: float = 20.0
    substep_us: int = 50
    n_static_edges: int = 20
    static_edge_contrast: float = 0.5
    opponent: bool = True
    opponent_contrast: float = 0.5
    n_decoys: int = 0
    decoy_contrast: float = 1.0
    imu_noise_sigma: float = 0.0
    spin: tuple | None = None
    render_ball: bool = True

    def __post_init__(self) -> None:
        if min(self.imu_rate, self.gaze_rate) <= 0 or self.duration <= 0:
            raise InvalidSceneError("rates and duration must be positive")
        if self.clutter_rate < 0 or self.contrast_event_density < 0:
            raise InvalidSceneError("event rates must be non-negative")


@dataclass(frozen=True)
class GroundTruth:
    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    impact_point: np.ndarray | None
    impact_time: float | None
    bounces: tuple = ()

    @property
    def states(self) -> list[BallState]:
        return [BallState(float(t), p, v) for t, p, v in zip(self.t, self.p, self.v)]

    def interpolator(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.t, self.p, self.v, axis=0)


@dataclass(frozen=True)
class RenderedScene:
    events: EventWindow
    gaze: np.ndarray  # (G, 3) t_us, x, y
    imu: np.ndarray  # (I, 4) t_us, wx, wy, wz
    cam_track: np.ndarray  # (T, 7) t_us, px, py, pz (camera frame), u, v, r
    visible: tuple[float, float] | None
    n_ball_events: int
    n_clutter_events: int


# ---------------------------------------------------------------------------
# Flight
# ---------------------------------------------------------------------------


def _accel(v: np.ndarray, phys: PhysicsParams, spin: np.ndarray | None) -> np.ndarray:
    a = phys.g - phys.k_d * math.sqrt(float(v @ v)) * v
    if spin is not None:
        a = a + phys.k_m * np.cross(spin, v)
    return a


def _rk4(p: np.ndarray, v: np.ndarray, dt: float, phys: PhysicsParams, spin) -> tuple[np.ndarray, np.ndarray]:
    k1p, k1v = v, _accel(v, phys, spin)
    k2p, k2v = v + 0.5 * dt * k1v, _accel(v + 0.5 * dt * k1v, phys, spin)
    k3p, k3v = v + 0.5 * dt * k2v, _accel(v + 0.5 * dt * k2v, phys, spin)
    k4p, k4v = v + dt * k3v, _accel(v + dt * k3v, phys, spin)
    p_new = p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    v_new = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return p_new, v_new


def simulate_flight(cfg: SceneConfig) -> GroundTruth:
    """Integrate the ball flight at 1 kHz with RK4 and table bounces.

    A bounce reflects the vertical velocity, ``v_z -> -e v_z``; its instant is
    bisected to 1 us inside the step that crosses the table plane.

    Raises:
        InvalidSceneError: if the ball starts below the table moving down.
    """
    phys = cfg.physics
    h = phys.table_height
    p = np.asarray(cfg.initial_state.p, dtype=float).copy()
    v = np.asarray(cfg.initial_state.v, dtype=float).copy()
    if p[2] < h and v[2] < 0:
        raise InvalidSceneError("initial state below the table with downward velocity")
    spin = None if cfg.spin is None else np.asarray(cfg.spin, dtype=float)
    dt = 1.0 / GT_RATE
    n = int(round(cfg.duration * GT_RATE))
    ts = cfg.initial_state.t + dt * np.arange(n + 1)
    P = np.empty((n + 1, 3))
    V = np.empty((n + 1, 3))
    P[0], V[0] = p, v
    impact_point = impact_time = None
    bounces = []
    for i in range(n):
        p_new, v_new = _rk4(p, v, dt, phys, spin)
        if p_new[2] < h <= p[2] and v_new[2] < 0:
            lo, hi = 0.0, dt
            while hi - lo > BOUNCE_TOL_S:
                mid = 0.5 * (lo + hi)
                if _rk4(p, v, mid, phys, spin)[0][2] < h:
                    hi = mid
                else:
                    lo = mid
            tau = 0.5 * (lo + hi)
            pc, vc = _rk4(p, v, tau, phys, spin)
            pc[2] = h
            vc[2] = -phys.restitution_e * vc[2]
            t_hit = float(ts[i] + tau)
            bounces.append(t_hit)
            if impact_point is None:
                impact_point, impact_time = pc.copy(), t_hit
            p_new, v_new = _rk4(pc, vc, dt - tau, phys, spin)
        p, v = p_new, v_new
        P[i + 1], V[i + 1] = p, v
    return GroundTruth(ts, P, V, impact_point, impact_time, tuple(bounces))


# ---------------------------------------------------------------------------
# Camera rotation
# ---------------------------------------------------------------------------


def _profile_arrays(profile) -> tuple[np.ndarray, np.ndarray]:
    starts = np.array([float(s) for s, _ in profile])
    rates = np.array([np.asarray(tuple(w), dtype=float) for _, w in profile]).reshape(-1, 3)
    order = np.argsort(starts, kind="stable")
    return starts[order], rates[order]


def angular_rate_at(profile, t) -> np.ndarray:
    starts, rates = _profile_arrays(profile)
    idx = np.clip(np.searchsorted(starts, np.asarray(t, dtype=float), side="right") - 1, 0, len(starts) - 1)
    return rates[idx]


def camera_rotation(profile, t) -> np.ndarray:
    """Rotation ``C(t)`` mapping frame-0 camera vectors to the camera at ``t``.

    ``t`` may be a scalar or an array; returns ``(3, 3)`` or ``(N, 3, 3)``.
    """
    starts, rates = _profile_arrays(profile)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    # orientation at the start of each segment, assuming t >= 0
    seg_start = np.maximum(starts, 0.0)
    acc = [Rotation.identity()]
    for k in range(1, len(starts)):
        span = max(seg_start[k] - seg_start[k - 1], 0.0)
        acc.append(Rotation.from_rotvec(rates[k - 1] * span) * acc[-1])
    idx = np.clip(np.searchsorted(seg_start, t_arr, side="right") - 1, 0, len(starts) - 1)
    out = np.empty((len(t_arr), 3, 3))
    for k in np.unique(idx):
        sel = idx == k
        rel = Rotation.from_rotvec(np.outer(t_arr[sel] - seg_start[k], rates[k]))
        out[sel] = (rel * acc[k]).as_matrix()
    return out[0] if np.ndim(t) == 0 else out


def random_rotation_profile(rng: np.random.Generator, duration: float, rate: float, segment: float = 0.02,
                            jitter: float = 0.3) -> tuple:
    """Piecewise-constant head rotation of roughly constant magnitude ``rate``.

    The axis drifts between segments and each segment's magnitude is
    perturbed by ``jitter`` (relative).
    """
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    profile = []
    for k in range(max(1, int(math.ceil(duration / segment)) + 1)):
        axis = axis + 0.3 * rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        mag = rate * (1.0 + jitter * rng.uniform(-1.0, 1.0))
        profile.append((k * segment, AngularRate(*(axis * mag))))
    return tuple(profile)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _world_to_cam0(cfg: SceneConfig) -> np.ndarray:
    return camera_to_world_rotation(cfg.mount_pitch).T


def ball_camera_track(gt: GroundTruth, cfg: SceneConfig, t: np.ndarray) -> np.ndarray:
    """Ball centre in the (rotating) camera frame at times ``t`` (seconds)."""
    pw = gt.interpolator()(t)
    p0 = pw @ _world_to_cam0(cfg).T
    C = camera_rotation(cfg.camera_rotation_profile, t)
    return np.einsum("nij,nj->ni", C, p0)


def _project_safe(pc: np.ndarray, cam: CameraModel, distorted: bool = True) -> tuple[np.ndarray, np.ndarray]:
    ok = pc[..., 2] > 0.05
    safe = np.where(ok[..., None], pc, np.array([0.0, 0.0, 1.0]))
    return project(safe, cam, distorted=distorted), ok


def _rim_crossings(times: np.ndarray, centers: np.ndarray, radii: np.ndarray, cfg: SceneConfig,
                   rng: np.random.Generator) -> tuple[np.ndarray, ...]:
    """Pixel-centre crossings of a (possibly blurred) moving circle."""
    cam = cfg.cam
    density = cfg.contrast_event_density
    if density <= 0:
        return (np.zeros(0),) * 4
    pad = cfg.edge_width / 2.0 + 2.0
    lo = np.floor((centers - radii[:, None]).min(axis=0) - pad)
    hi = np.ceil((centers + radii[:, None]).max(axis=0) + pad)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, [cam.width - 1, cam.height - 1])
    if np.any(hi < lo):
        return (np.zeros(0),) * 4
    gx, gy = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1))
    q_raw = np.column_stack([gx.ravel(), gy.ravel()])
    q = undistort(q_raw, cam) if cam.has_distortion else q_raw
    dist = np.linalg.norm(q[None, :, :] - centers[:, None, :], axis=2) - radii[:, None]
    n_levels = max(1, int(math.ceil(density)))
    keep_prob = density / n_levels
    if cfg.edge_width > 0:
        levels = -cfg.edge_width / 2 + (np.arange(n_levels) + 0.5) * cfg.edge_width / n_levels
    else:
        levels = np.zeros(n_levels)
    out_t, out_x, out_y, out_p = [], [], [], []
    for s in levels:
        e = dist - s
        cross = (e[:-1] > 0) != (e[1:] > 0)
        k, j = np.nonzero(cross)
        if len(k) == 0:
            continue
        keep = rng.random(len(k)) < keep_prob
        k, j = k[keep], j[keep]
        e0, e1 = e[k, j], e[k + 1, j]
        alpha = e0 / (e0 - e1)
        out_t.append(times[k] + alpha * (times[k + 1] - times[k]))
        out_x.append(q_raw[j, 0])
        out_y.append(q_raw[j, 1])
        out_p.append(np.where(e1 < e0, 1, -1))
    if not out_t:
        return (np.zeros(0),) * 4
    return tuple(np.concatenate(a) for a in (out_t, out_x, out_y, out_p))


@dataclass
class _Curve:
    points: np.ndarray  # (n, 2) undistorted px in frame-0 image
    velocity: np.ndarray  # (2,) px/s in frame-0 image
    contrast: float
    sign: int


def _curve_events(curves: list[_Curve], times: np.ndarray, C: np.ndarray, cfg: SceneConfig,
                  rng: np.random.Generator) -> tuple[np.ndarray, ...]:
    if not curves or cfg.contrast_event_density <= 0:
        return (np.zeros(0),) * 4
    cam = cfg.cam
    out_t, out_x, out_y, out_p = [], [], [], []
    dt = np.diff(times)
    for cv in curves:
        pts = cv.points[None, :, :] + times[:, None, None] * cv.velocity[None, None, :]
        hom = np.concatenate([pts, np.ones(pts.shape[:2] + (1,))], axis=2)
        bear = hom @ cam.K_inv.T
        rot = np.einsum("kij,knj->kni", C, bear)
        img, ok = _project_safe(rot, cam)
        # tangent from neighbouring samples, normal perpendicular to it
        tang = np.gradient(img, axis=1)
        tang /= np.maximum(np.linalg.norm(tang, axis=2, keepdims=True), 1e-12)
        normal = np.stack([-tang[..., 1], tang[..., 0]], axis=2)
        disp = img[1:] - img[:-1]
        dn = np.einsum("kni,kni->kn", disp, normal[:-1])
        lam = cfg.contrast_event_density * cv.contrast * np.abs(dn)
        lam[~(ok[1:] & ok[:-1])] = 0.0
        counts = rng.poisson(lam)
        k, j = np.nonzero(counts)
        if len(k) == 0:
            continue
        reps = counts[k, j]
        k, j = np.repeat(k, reps), np.repeat(j, reps)
        u = rng.random(len(k))
        side = rng.uniform(-0.5, 0.5, len(k))
        pos = img[k, j] + u[:, None] * disp[k, j] + side[:, None] * tang[k, j]
        out_t.append(times[k] + u * dt[k])
        out_x.append(pos[:, 0])
        out_y.append(pos[:, 1])
        out_p.append(cv.sign * np.where(dn[k, j] >= 0, 1, -1))
    if not out_t:
        return (np.zeros(0),) * 4
    return tuple(np.concatenate(a) for a in (out_t, out_x, out_y, out_p))


def _scene_curves(cfg: SceneConfig, gt: GroundTruth, rng: np.random.Generator) -> list[_Curve]:
    cam = cfg.cam
    curves = []
    for _ in range(cfg.n_static_edges):
        a = rng.uniform([0, 0], [cam.width, cam.height])
        ang = rng.uniform(0, math.pi)
        length = rng.uniform(40, 300)
        s = np.arange(0.0, length, 1.0)
        pts = a[None, :] + s[:, None] * np.array([math.cos(ang), math.sin(ang)])[None, :]
        curves.append(_Curve(pts, np.zeros(2), cfg.static_edge_contrast, int(rng.choice([-1, 1]))))
    p0 = ball_camera_track(gt, replace(cfg, camera_rotation_profile=((0.0, AngularRate(0, 0, 0)),)),
                           np.array([gt.t[0]]))[0]
    c0 = project(p0, cam, distorted=False) if p0[2] > 0.05 else np.array([cam.cx, cam.cy])
    if cfg.opponent:
        side = rng.choice([-1.0, 1.0])
        center = c0 + np.array([side * rng.uniform(70, 120), rng.uniform(-40, 0)])
        axes = np.array([rng.uniform(25, 40), rng.uniform(70, 100)])
        curves.append(_Curve(_ellipse(center, axes, rng.uniform(-0.3, 0.3)),
                             rng.uniform(-150, 150, 2), cfg.opponent_contrast, 1))
    for _ in range(cfg.n_decoys):
        while True:
            center = rng.uniform([20, 20], [cam.width - 20, cam.height - 20])
            if np.linalg.norm(center - c0) > 120:
                break
        r = rng.uniform(4.0, 7.0)
        curves.append(_Curve(_ellipse(center, np.array([r, r]), 0.0), rng.uniform(-300, 300, 2),
                             cfg.decoy_contrast, 1))
    return curves


def _ellipse(center: np.ndarray, axes: np.ndarray, angle: float) -> np.ndarray:
    perim = 2 * math.pi * math.sqrt(0.5 * (axes[0] ** 2 + axes[1] ** 2))
    th = np.linspace(0, 2 * math.pi, max(int(perim), 12), endpoint=False)
    pts = np.column_stack([axes[0] * np.cos(th), axes[1] * np.sin(th)])
    c, s = math.cos(angle), math.sin(angle)
    return center + pts @ np.array([[c, s], [-s, c]])


def render_events(gt: GroundTruth, cfg: SceneConfig, t_range: tuple[float, float] | None = None) -> RenderedScene:
    """Render the event stream, gaze track and gyro samples for a scene.

    ``t_range`` (seconds) restricts rendering to a sub-interval; geometry of
    the static scene does not depend on it, only on ``cfg.seed``.

    Raises:
        NoEventsError: if nothing at all is emitted in the interval.
    """
    cam = cfg.cam
    t0, t1 = t_range if t_range is not None else (float(gt.t[0]), float(gt.t[-1]))
    t1 = min(t1, float(gt.t[-1]))
    if t1 <= t0:
        raise NoEventsError("empty render interval")
    ss = np.random.SeedSequence(cfg.seed)
    g_geom, g_ball, g_curve, g_clutter, g_gaze, g_imu, g_jit = (np.random.default_rng(s) for s in ss.spawn(7))

    curves = _scene_curves(cfg, gt, g_geom)
    sub = cfg.substep_us * 1e-6
    n_sub = max(1, int(round((t1 - t0) / sub)))
    grid = t0 + (t1 - t0) * np.arange(n_sub + 1) / n_sub
    chunk = 100
    parts = []
    n_ball = 0
    vis_t = []
    for c_start in range(0, n_sub, chunk):
        times = grid[c_start:min(c_start + chunk, n_sub) + 1]
        pc = ball_camera_track(gt, cfg, times)
        centers, ok = _project_safe(pc, cam, distorted=False)
        radii = cam.fx * cfg.physics.radius / np.where(ok, pc[:, 2], 1.0)
        onscreen = ok & (centers[:, 0] > -radii) & (centers[:, 0] < cam.width + radii) \
            & (centers[:, 1] > -radii) & (centers[:, 1] < cam.height + radii)
        if cfg.render_ball and np.all(onscreen):
            vis_t.extend([times[0], times[-1]])
            ev = _rim_crossings(times, centers, radii, cfg, g_ball)
            n_ball += len(ev[0])
            parts.append(ev)
        C = camera_rotation(cfg.camera_rotation_profile, times)
        parts.append(_curve_events(curves, times, C, cfg, g_curve))

    n_clutter = int(g_clutter.poisson(cfg.clutter_rate * (t1 - t0)))
    parts.append((
        g_clutter.uniform(t0, t1, n_clutter),
        g_clutter.integers(0, cam.width, n_clutter).astype(float),
        g_clutter.integers(0, cam.height, n_clutter).astype(float),
        g_clutter.choice([-1, 1], n_clutter),
    ))

    t = np.concatenate([p[0] for p in parts])
    x = np.rint(np.concatenate([p[1] for p in parts]))
    y = np.rint(np.concatenate([p[2] for p in parts]))
    pol = np.concatenate([p[3] for p in parts])
    if cfg.event_jitter_us > 0:
        t = t + g_jit.normal(0.0, cfg.event_jitter_us * 1e-6, len(t))
    t = np.clip(t, t0, t1 - 1e-6)
    keep = (x >= 0) & (x < cam.width) & (y >= 0) & (y < cam.height)
    t_us = np.rint(t[keep] * 1e6).astype(np.int64)
    order = np.lexsort((y[keep], x[keep], t_us))
    events_t = t_us[order]
    if len(events_t) == 0:
        raise NoEventsError("scene produced no events")
    win = EventWindow(
        events_t,
        x[keep][order].astype(np.int64),
        y[keep][order].astype(np.int64),
        pol[keep][order].astype(np.int8),
        int(round(t0 * 1e6)),
        int(round(t1 * 1e6)),
    )

    # gaze follows the projected ball centre
    # one sample of margin on each side so short windows still see a gaze fix
    g_lo = max(math.ceil(t0 * cfg.gaze_rate) - 1, math.ceil(float(gt.t[0]) * cfg.gaze_rate))
    g_hi = min(math.floor(t1 * cfg.gaze_rate) + 1, math.floor(float(gt.t[-1]) * cfg.gaze_rate))
    t_g = np.arange(g_lo, g_hi + 1) / cfg.gaze_rate
    pg = ball_camera_track(gt, cfg, t_g)
    cg, okg = _project_safe(pg, cam)
    cg = cg + g_gaze.normal(0.0, cfg.gaze_noise_sigma, cg.shape)
    if not np.all(okg) and np.any(okg):
        cg[~okg] = cg[np.flatnonzero(okg)[-1]]
    cg[:, 0] = np.clip(cg[:, 0], 0, cam.width - 1)
    cg[:, 1] = np.clip(cg[:, 1], 0, cam.height - 1)
    gaze = np.column_stack([np.rint(t_g * 1e6), cg])

    t_i = np.arange(math.ceil(t0 * cfg.imu_rate), math.floor(t1 * cfg.imu_rate) + 1) / cfg.imu_rate
    w = angular_rate_at(cfg.camera_rotation_profile, t_i)
    if cfg.imu_noise_sigma > 0:
        w = w + g_imu.normal(0.0, cfg.imu_noise_sigma, w.shape)
    imu = np.column_stack([np.rint(t_i * 1e6), w])

    sel = (gt.t >= t0 - 1e-9) & (gt.t <= t1 + 1e-9)
    t_tr = gt.t[sel]
    ptr = ball_camera_track(gt, cfg, t_tr)
    ctr, oktr = _project_safe(ptr, cam)
    rtr = np.where(oktr, cam.fx * cfg.physics.radius / np.where(oktr, ptr[:, 2], 1.0), np.nan)
    ctr[~oktr] = np.nan
    track = np.column_stack([np.rint(t_tr * 1e6), ptr, ctr, rtr])
    visible = (min(vis_t), max(vis_t)) if vis_t else None
    return RenderedScene(win, gaze, imu, track, visible, n_ball, n_clutter)


# ---------------------------------------------------------------------------
# Randomised detection scenes
# ---------------------------------------------------------------------------

# calibrated desk-scale serve regime; see README "Synthetic protocol"
SERVE_SCENE = dict(
    duration=0.6,
    n_decoys=3,
    edge_width=1.5,
    contrast_event_density=12.0,
    n_static_edges=30,
    static_edge_contrast=1.0,
)
SERVE_ROTATION = (0.05, 0.4)  # rad/s, head-tracking range


def random_serve_scene(rng: np.random.Generator, rotation: tuple[float, float] = SERVE_ROTATION,
                       **overrides) -> SceneConfig:
    """Opponent serve towards the camera with random head rotation.

    The ball starts 2.5-2.9 m ahead, 0.15-0.35 m above the table, and flies
    at 5-9 m/s towards the player.
    """
    p0 = np.array([rng.uniform(-0.3, 0.3), rng.uniform(2.5, 2.9), -0.5 + rng.uniform(0.15, 0.35)])
    v0 = np.array([rng.uniform(-0.8, 0.8), rng.uniform(-9.0, -5.0), rng.uniform(0.5, 2.0)])
    kw = dict(SERVE_SCENE)
    kw.update(
        initial_state=BallState(0.0, p0, v0),
        camera_rotation_profile=random_rotation_profile(rng, SERVE_SCENE["duration"], rng.uniform(*rotation)),
        seed=int(rng.integers(1 << 30)),
    )
    kw.update(overrides)
    return SceneConfig(**kw)


def sample_windows(gt: GroundTruth, cfg: SceneConfig, rng: np.random.Generator, n: int,
                   dt: float = 0.005, depth_range: tuple[float, float] = (1.5, 3.0)) -> np.ndarray:
    """Start times of ``n`` distinct pre-impact windows with the ball in range.

    Windows are aligned to multiples of ``dt``; the ball depth at the window
    start must lie inside ``depth_range``.
    """
    t = np.arange(0.0, cfg.duration - dt + 1e-12, dt)
    z = ball_camera_track(gt, cfg, t)[:, 2]
    ok = (z > depth_range[0]) & (z < depth_range[1])
    if gt.impact_time is not None:
        ok &= t + dt <= gt.impact_time
    cand = t[ok]
    if len(cand) == 0:
        raise InvalidSceneError("no window with the ball in the depth range")
    return np.sort(rng.choice(cand, min(n, len(cand)), replace=False))


def random_forecast_scene(rng: np.random.Generator, min_impact_y: float = 0.5,
                          max_tries: int = 1000) -> tuple[SceneConfig, GroundTruth]:
    """Static-camera serve whose first bounce lands at least ``min_impact_y`` ahead.

    Draws from :func:`random_serve_scene` and rejects flights without a
    bounce in front of the player.
    """
    static = ((0.0, AngularRate(0.0, 0.0, 0.0)),)
    for _ in range(max_tries):
        cfg = random_serve_scene(rng, camera_rotation_profile=static)
        gt = simulate_flight(cfg)
        if gt.impact_point is not None and gt.impact_point[1] >= min_impact_y:
            return cfg, gt
    raise InvalidSceneError("no admissible serve found")


# ---------------------------------------------------------------------------
# Measurement-level synthesis for forecasting studies
# ---------------------------------------------------------------------------


def synthesize_measurements(gt: GroundTruth, cfg: SceneConfig, rate: float, t_first: float, t_last: float,
                            center_sigma: float, radius_sigma: float, rng: np.random.Generator,
                            outlier_rate: float = 0.0, outlier_sigma: float = 1.5):
    """Noisy per-window ball measurements sampled from the ground truth.

    Centre noise is isotropic Gaussian in pixels; radius noise is Gaussian in
    pixels and maps to depth through ``Z = f W / r``. Outliers add a larger
    radius error with probability ``outlier_rate``.
    """
    from .core import BallMeasurement

    times = np.arange(t_first, t_last + 1e-9, 1.0 / rate)
    pc = ball_camera_track(gt, cfg, times)
    cam = cfg.cam
    uv = project(pc, cam, distorted=False)
    r_true = cam.fx * cfg.physics.radius / pc[:, 2]
    out = []
    for k, t in enumerate(times):
        c = uv[k] + rng.normal(0.0, center_sigma, 2)
        dr = rng.normal(0.0, radius_sigma)
        if outlier_rate > 0 and rng.random() < outlier_rate:
            dr += rng.normal(0.0, outlier_sigma)
        r = max(r_true[k] + dr, 0.5)
        out.append(BallMeasurement(float(t), float(c[0]), float(c[1]), float(r), cam.fx * cfg.physics.radius / r))
    return out


def ground_truth_measurements(gt: GroundTruth, cfg: SceneConfig, rate: float, t_first: float, t_last: float):
    """Exact measurements (zero noise) at the given rate."""
    return synthesize_measurements(gt, cfg, rate, t_first, t_last, 0.0, 0.0, np.random.default_rng(0))


def depth_check_point(p_img, depth: float, cam: CameraModel) -> np.ndarray:
    """Back-project an ideal measurement; handy for quick sanity checks."""
    return back_project(np.asarray(p_img, dtype=float), depth, cam)
