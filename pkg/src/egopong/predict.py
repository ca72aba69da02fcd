"""Trajectory forecasting from per-window ball measurements.

Pipeline:

1. ``fit_monotone_poly``: least-squares polynomials for the image centre
   ``x(t), y(t)`` and for depth ``Z(t)``, the latter constrained to be
   non-increasing (the ball approaches the camera). The depth fit is a convex
   QP solved with a primal active-set method.
2. ``assemble_states``: back-project the smoothed samples to 3D and take
   finite differences for velocity.
3. ``propagate``: explicit Euler under gravity, quadratic drag and optional
   Magnus lift, with a table-bounce switch.
4. ``ekf_bootstrap``: constant-acceleration Kalman filter over the assembled
   states to refine the initial conditions.

All propagation happens in a z-up world frame whose origin is the camera
centre; ``cam_to_world`` rotations map camera-frame vectors into it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from . import defaults as D
from .core import (BallMeasurement, BallState, CameraModel, DataError, NumericalError, PhysicsParams, back_project,
                   camera_to_world_rotation)

log = logging.getLogger(__name__)

QP_TOL = 1e-12
MONOTONE_TOL = 1e-9
PSD_TOL = 1e-9


class InsufficientMeasurementsError(DataError):
    pass


class CovarianceError(NumericalError):
    pass


# ---------------------------------------------------------------------------
# Monotone regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyFit:
    """Polynomials in the normalised time ``u = (t - t0) / T``.

    Coefficients are in ascending powers of ``u``.
    """

    beta_x: np.ndarray
    beta_y: np.ndarray
    beta_z: np.ndarray
    degree: int
    t0: float
    T: float
    collocation: np.ndarray = field(default_factory=lambda: np.zeros(0))  # seconds
    objective: float = 0.0
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def _u(self, t) -> np.ndarray:
        return (np.asarray(t, dtype=float) - self.t0) / self.T

    def x(self, t) -> np.ndarray:
        return np.polynomial.polynomial.polyval(self._u(t), self.beta_x)

    def y(self, t) -> np.ndarray:
        return np.polynomial.polynomial.polyval(self._u(t), self.beta_y)

    def z(self, t) -> np.ndarray:
        return np.polynomial.polynomial.polyval(self._u(t), self.beta_z)

    def dz(self, t) -> np.ndarray:
        """``dZ/dt`` in metres per second."""
        d = np.polynomial.polynomial.polyder(self.beta_z)
        return np.polynomial.polynomial.polyval(self._u(t), d) / self.T


def _design(u: np.ndarray, degree: int) -> np.ndarray:
    return np.vander(u, degree + 1, increasing=True)


def _derivative_rows(u: np.ndarray, degree: int) -> np.ndarray:
    G = np.zeros((len(u), degree + 1))
    for j in range(1, degree + 1):
        G[:, j] = j * u ** (j - 1)
    return G


def solve_qp(H: np.ndarray, c: np.ndarray, G: np.ndarray, h: np.ndarray, x0: np.ndarray,
             max_iter: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Minimise ``1/2 x'Hx - c'x`` subject to ``G x <= h``.

    Primal active-set method for a strictly convex QP started from a
    feasible ``x0``. Returns the minimiser and the multipliers (one per
    constraint, zero for inactive ones).

    Raises:
        DataError: if ``x0`` is infeasible.
        NumericalError: if the iteration limit is reached.
    """
    n, m = len(c), len(h)
    x = np.asarray(x0, dtype=float).copy()
    scale = max(1.0, float(np.max(np.abs(G))) if m else 1.0)
    if m and np.any(G @ x - h > QP_TOL * scale):
        raise DataError("QP start point is infeasible")
    work: list[int] = []
    lam_full = np.zeros(m)
    for _ in range(max_iter or 50 * (n + m + 1)):
        g = H @ x - c
        k = len(work)
        A = G[work] if k else np.zeros((0, n))
        K = np.block([[H, A.T], [A, np.zeros((k, k))]])
        rhs = np.concatenate([-g, np.zeros(k)])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        p, lam = sol[:n], sol[n:]
        if np.linalg.norm(p) <= QP_TOL * max(1.0, np.linalg.norm(x)):
            if k == 0 or lam.min() >= -QP_TOL * max(1.0, np.abs(lam).max()):
                lam_full[:] = 0.0
                lam_full[work] = np.maximum(lam, 0.0)
                return x, lam_full
            work.pop(int(np.argmin(lam)))
            continue
        alpha, blocking = 1.0, None
        Gp = G @ p
        for i in range(m):
            if i in work or Gp[i] <= QP_TOL * scale:
                continue
            a = (h[i] - G[i] @ x) / Gp[i]
            if a < alpha:
                alpha, blocking = max(a, 0.0), i
        x = x + alpha * p
        if blocking is not None:
            work.append(blocking)
    raise NumericalError("active-set QP did not converge")


def fit_monotone_poly(meas: Sequence[BallMeasurement], degree: int = D.POLY_DEGREE,
                      grid: int = D.COLLOCATION_GRID) -> PolyFit:
    """Polynomial fits with ``dZ/dt <= 0`` at the measurement times and a grid.

    Raises:
        InsufficientMeasurementsError: no measurements.
        DataError: repeated timestamps.
    """
    if len(meas) == 0:
        raise InsufficientMeasurementsError("no measurements to fit")
    t = np.array([m.t for m in meas], dtype=float)
    if len(np.unique(t)) != len(t):
        raise DataError("measurement timestamps must be distinct")
    order = np.argsort(t)
    t = t[order]
    cx = np.array([meas[i].cx_img for i in order])
    cy = np.array([meas[i].cy_img for i in order])
    z = np.array([meas[i].depth for i in order])
    t0 = float(t[0])
    T = float(t[-1] - t[0]) or 1.0
    u = (t - t0) / T
    d = int(degree)
    if d < 0:
        raise DataError("degree must be non-negative")
    while d > 0 and np.linalg.matrix_rank(_design(u, d)) < d + 1:
        d -= 1
    if d < degree:
        log.warning("rank-deficient design: degree reduced from %d to %d", degree, d)
    A = _design(u, d)
    bx = np.linalg.lstsq(A, cx, rcond=None)[0]
    by = np.linalg.lstsq(A, cy, rcond=None)[0]
    u_col = np.unique(np.concatenate([u, np.linspace(0.0, 1.0, grid)])) if grid > 0 else u
    G = _derivative_rows(u_col, d)
    H = A.T @ A
    c = A.T @ z
    x0 = np.zeros(d + 1)
    x0[0] = float(np.mean(z))
    bz, lam = solve_qp(H, c, G, np.zeros(len(u_col)), x0)
    obj = float(np.sum((A @ bz - z) ** 2))
    return PolyFit(bx, by, bz, d, t0, T, t0 + u_col * T, obj, lam)


# ---------------------------------------------------------------------------
# State assembly
# ---------------------------------------------------------------------------


def reject_outliers(meas: Sequence[BallMeasurement], max_residual_px: float = 10.0,
                    degree: int = D.POLY_DEGREE, max_depth_rel: float = 0.2) -> list[BallMeasurement]:
    """Drop measurements that disagree with a smooth polynomial track.

    Image centre and depth are fitted by least squares; the worst point by
    leave-one-out residual (centre over ``max_residual_px`` or relative
    depth over ``max_depth_rel``) is removed and the fit repeated until all points
    pass. At least ``degree + 2`` points are kept.
    """
    keep = sorted(meas, key=lambda m: m.t)
    while len(keep) > degree + 2:
        t = np.array([m.t for m in keep])
        u = (t - t[0]) / max(t[-1] - t[0], 1e-12)
        A = _design(u, degree)
        obs = np.array([[m.cx_img, m.cy_img, m.depth] for m in keep])
        beta, *_ = np.linalg.lstsq(A, obs, rcond=None)
        # leave-one-out residuals so that isolated end points cannot pull the fit onto themselves
        lev = np.einsum("ij,ji->i", A, np.linalg.pinv(A))
        res = (obs - A @ beta) / np.maximum(1.0 - lev, 1e-6)[:, None]
        score = np.maximum(np.linalg.norm(res[:, :2], axis=1) / max_residual_px,
                           np.abs(res[:, 2] / obs[:, 2]) / max_depth_rel)
        worst = int(np.argmax(score))
        if score[worst] <= 1.0:
            break
        log.debug("dropping measurement at t=%.4f s (score %.2f)", keep[worst].t, score[worst])
        keep.pop(worst)
    return keep


@dataclass(frozen=True)
class MeasuredStates:
    t: np.ndarray  # (M,)
    p: np.ndarray  # (M, 3) world frame
    v: np.ndarray | None  # (M, 3), None for a single sample


def _rotations(cam_to_world, n: int) -> np.ndarray:
    if cam_to_world is None:
        return np.broadcast_to(np.eye(3), (n, 3, 3))
    R = np.asarray(cam_to_world, dtype=float)
    if R.shape == (3, 3):
        return np.broadcast_to(R, (n, 3, 3))
    if R.shape != (n, 3, 3):
        raise DataError(f"expected (3, 3) or ({n}, 3, 3) rotations, got {R.shape}")
    return R


def finite_difference(t: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Central differences inside, one-sided differences at the ends."""
    v = np.empty_like(p)
    v[1:-1] = (p[2:] - p[:-2]) / (t[2:] - t[:-2])[:, None]
    v[0] = (p[1] - p[0]) / (t[1] - t[0])
    v[-1] = (p[-1] - p[-2]) / (t[-1] - t[-2])
    return v


def assemble_states(fit: PolyFit, times, cam: CameraModel, cam_to_world=None) -> MeasuredStates:
    """Back-project the smoothed image centre and depth at ``times``."""
    t = np.sort(np.asarray(times, dtype=float))
    uv = np.column_stack([fit.x(t), fit.y(t)])
    z = fit.z(t)
    if np.any(z <= 0):
        raise NumericalError("fitted depth is not positive")
    pc = back_project(uv, z, cam)
    R = _rotations(cam_to_world, len(t))
    pw = np.einsum("nij,nj->ni", R, pc)
    if len(t) < 2:
        return MeasuredStates(t, pw, None)
    return MeasuredStates(t, pw, finite_difference(t, pw))


def gyro_rotations(imu: np.ndarray, times, mount_pitch: float = D.MOUNT_PITCH) -> np.ndarray:
    """Camera-to-world rotations at ``times`` (s) from a gyro track.

    ``imu`` rows are ``t_us, wx, wy, wz`` in the camera frame. Each sample's
    rate is held until the next one; the camera frame at ``t = 0`` is the
    mount frame given by ``mount_pitch``. Returns ``(N, 3, 3)``.
    """
    imu = np.asarray(imu, dtype=float).reshape(-1, 4)
    if len(imu) == 0:
        raise DataError("empty IMU track")
    imu = imu[np.argsort(imu[:, 0], kind="stable")]
    ts, w = imu[:, 0] * 1e-6, imu[:, 1:]
    knots = np.concatenate([[0.0], ts[ts > 0.0]])
    rates = w[np.clip(np.searchsorted(ts, knots, side="right") - 1, 0, len(ts) - 1)]
    acc = [Rotation.identity()]
    for k in range(1, len(knots)):
        acc.append(Rotation.from_rotvec(rates[k - 1] * (knots[k] - knots[k - 1])) * acc[-1])
    t = np.atleast_1d(np.asarray(times, dtype=float))
    idx = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 1)
    C = np.empty((len(t), 3, 3))
    for k in np.unique(idx):
        sel = idx == k
        C[sel] = (Rotation.from_rotvec(np.outer(t[sel] - knots[k], rates[k])) * acc[k]).as_matrix()
    return np.einsum("ij,nkj->nik", camera_to_world_rotation(mount_pitch), C)


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bounce:
    t: float
    point: np.ndarray
    v_minus: np.ndarray
    v_plus: np.ndarray


@dataclass(frozen=True)
class TrajectoryPrediction:
    t: np.ndarray  # (K,) strictly increasing
    p: np.ndarray  # (K, 3)
    v: np.ndarray  # (K, 3)
    impact_point: np.ndarray | None
    impact_time: float | None
    mode: str = "propagate"
    n_updates: int = 0
    bounces: tuple[Bounce, ...] = ()

    @property
    def states(self) -> list[BallState]:
        return [BallState(float(t), p, v) for t, p, v in zip(self.t, self.p, self.v)]

    def with_meta(self, mode: str, n_updates: int) -> TrajectoryPrediction:
        return TrajectoryPrediction(self.t, self.p, self.v, self.impact_point, self.impact_time, mode, n_updates,
                                    self.bounces)


def _euler_accel(v: np.ndarray, physics: PhysicsParams, spin: np.ndarray | None) -> np.ndarray:
    a = physics.g - physics.k_d * math.sqrt(float(v @ v)) * v
    if spin is not None:
        a = a + physics.k_m * np.cross(spin, v)
    return a


def _crossing_fraction(z0: float, z1: float, h: float, iters: int = 60) -> float:
    """Fraction of a linear step where ``z`` reaches ``h`` (bisection)."""
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if z0 + mid * (z1 - z0) < h:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _propagate(p0, v0, physics: PhysicsParams, dt: float, horizon: float, t0: float,
               spin: np.ndarray | None) -> TrajectoryPrediction:
    if not dt > 0:
        raise DataError("dt must be positive")
    if horizon < 0:
        raise DataError("horizon must be non-negative")
    n = int(round(horizon / dt))
    h = physics.table_height
    e = physics.restitution_e
    P = np.empty((n + 1, 3))
    V = np.empty((n + 1, 3))
    p = np.asarray(p0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    P[0], V[0] = p, v
    impact_point = impact_time = None
    bounces = []
    for i in range(n):
        a = _euler_accel(v, physics, spin)
        p_new = p + v * dt
        v_new = v + a * dt
        if p_new[2] < h and v_new[2] < 0 and p[2] >= h:
            s = _crossing_fraction(p[2], p_new[2], h)
            t_hit = t0 + (i + s) * dt
            pc = p + v * (s * dt)
            pc[2] = h
            vc = v + a * (s * dt)
            v_plus = vc.copy()
            v_plus[2] = -e * vc[2]
            bounces.append(Bounce(t_hit, pc.copy(), vc.copy(), v_plus.copy()))
            if impact_point is None:
                impact_point, impact_time = pc.copy(), t_hit
            rest = (1.0 - s) * dt
            p_new = pc + v_plus * rest
            v_new = v_plus + _euler_accel(v_plus, physics, spin) * rest
        elif p_new[2] < h and v_new[2] < 0:
            # already below the plane: apply the switch without a crossing
            v_new = v_new.copy()
            v_new[2] = -e * v_new[2]
        p, v = p_new, v_new
        P[i + 1], V[i + 1] = p, v
    t = t0 + dt * np.arange(n + 1)
    return TrajectoryPrediction(t, P, V, impact_point, impact_time, bounces=tuple(bounces))


def propagate(p0, v0, physics: PhysicsParams | None = None, dt: float = D.INTEGRATION_DT,
              horizon: float = D.HORIZON, t0: float = 0.0) -> TrajectoryPrediction:
    """Explicit Euler under gravity and quadratic drag with table bounces.

    ``p <- p + v dt`` and ``v <- v + (g - k_d |v| v) dt``. When a step takes
    the ball below the table plane while descending, the crossing is located
    by bisection on the step, ``v_z`` is reflected with restitution ``e`` and
    the remainder of the step continues from the contact point.
    """
    return _propagate(p0, v0, physics or PhysicsParams(), dt, horizon, t0, None)


def propagate_magnus(p0, v0, omega, physics: PhysicsParams | None = None, dt: float = D.INTEGRATION_DT,
                     horizon: float = D.HORIZON, t0: float = 0.0) -> TrajectoryPrediction:
    """As :func:`propagate` with the lift term ``k_m (omega x v)`` added.

    A zero spin takes the drag-only code path, so results are bitwise equal.
    """
    w = np.asarray(omega, dtype=float)
    return _propagate(p0, v0, physics or PhysicsParams(), dt, horizon, t0, w if np.any(w) else None)


# ---------------------------------------------------------------------------
# EKF bootstrapping
# ---------------------------------------------------------------------------


@dataclass
class EkfState:
    x: np.ndarray  # [p, v, a]
    P: np.ndarray
    Q_psd: float
    R: np.ndarray
    t: float = 0.0
    n_updates: int = 0


H_EKF = np.hstack([np.eye(6), np.zeros((6, 3))])


def transition(dt: float) -> np.ndarray:
    """Constant-acceleration transition matrix."""
    I = np.eye(3)
    return np.block([[I, dt * I, 0.5 * dt * dt * I], [0 * I, I, dt * I], [0 * I, 0 * I, I]])


def process_noise(dt: float, q: float) -> np.ndarray:
    """White-jerk process noise with spectral density ``q``."""
    blk = q * np.array([[dt**5 / 20, dt**4 / 8, dt**3 / 6], [dt**4 / 8, dt**3 / 3, dt**2 / 2],
                        [dt**3 / 6, dt**2 / 2, dt]])
    return np.kron(blk, np.eye(3))


def _check_psd(P: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvalsh(P) >= -PSD_TOL))


def ekf_init(p0, v0, physics: PhysicsParams, t0: float = 0.0, pos_sigma: float = D.EKF_POS_SIGMA,
             vel_sigma: float = D.EKF_VEL_SIGMA, jerk_psd: float = D.EKF_JERK_PSD,
             acc_sigma: float = 5.0) -> EkfState:
    p0 = np.asarray(p0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    a0 = physics.g - physics.k_d * np.linalg.norm(v0) * v0
    P = np.diag([pos_sigma**2] * 3 + [vel_sigma**2] * 3 + [acc_sigma**2] * 3)
    R = np.diag([pos_sigma**2] * 3 + [vel_sigma**2] * 3)
    return EkfState(np.concatenate([p0, v0, a0]), P, jerk_psd, R, t0)


def ekf_step(state: EkfState, t: float, z: np.ndarray) -> EkfState:
    """One predict-update cycle; Joseph-form covariance update.

    Raises:
        CovarianceError: if the covariance is not PSD even after symmetrising.
    """
    dt = float(t - state.t)
    if dt < 0:
        raise DataError("measurements must be time-ordered")
    F = transition(dt)
    x = F @ state.x
    P = F @ state.P @ F.T + process_noise(dt, state.Q_psd)
    S = H_EKF @ P @ H_EKF.T + state.R
    K = np.linalg.solve(S, H_EKF @ P).T
    x = x + K @ (np.asarray(z, dtype=float) - H_EKF @ x)
    IKH = np.eye(9) - K @ H_EKF
    P = IKH @ P @ IKH.T + K @ state.R @ K.T
    P = 0.5 * (P + P.T)
    if not _check_psd(P):
        w, U = np.linalg.eigh(P)
        P = (U * np.maximum(w, 0.0)) @ U.T
        if not _check_psd(P):
            raise CovarianceError("covariance lost positive semi-definiteness")
        log.warning("covariance clipped to PSD at t=%.6f", t)
    return EkfState(x, P, state.Q_psd, state.R, float(t), state.n_updates + 1)


def ekf_bootstrap(states: MeasuredStates, physics: PhysicsParams | None = None, **noise) -> tuple[np.ndarray, np.ndarray]:
    """Filter the assembled states; returns the final position and velocity.

    The first cycle uses the first measurement with a zero time step.
    """
    physics = physics or PhysicsParams()
    if states.v is None or len(states.t) < 2:
        raise InsufficientMeasurementsError("EKF bootstrapping needs at least two states")
    st = ekf_init(states.p[0], states.v[0], physics, float(states.t[0]), **noise)
    for t, p, v in zip(states.t, states.p, states.v):
        st = ekf_step(st, float(t), np.concatenate([p, v]))
    return st.x[:3].copy(), st.x[3:6].copy()


# ---------------------------------------------------------------------------
# Forecasting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForecastConfig:
    degree: int = D.POLY_DEGREE
    grid: int = D.COLLOCATION_GRID
    dt: float = D.INTEGRATION_DT
    horizon: float = D.HORIZON
    jerk_psd: float = D.EKF_JERK_PSD
    pos_sigma: float = D.EKF_POS_SIGMA
    vel_sigma: float = D.EKF_VEL_SIGMA


def forecast_single_batch(meas: Sequence[BallMeasurement], physics: PhysicsParams | None = None,
                          cam: CameraModel | None = None, mode: str = "ekf", horizon: float | None = None,
                          cam_to_world=None, config: ForecastConfig | None = None,
                          spin=None) -> TrajectoryPrediction:
    """Forecast from one batch of measurements.

    Propagation starts at the last measurement time (EKF mode) or at the
    first one (raw mode, ``p0 = p_0`` and ``v0`` the mean velocity) and in
    both cases runs until ``horizon`` seconds after the last measurement.

    Raises:
        InsufficientMeasurementsError: fewer than two measurements.
    """
    physics = physics or PhysicsParams()
    cam = cam or CameraModel()
    cfg = config or ForecastConfig()
    horizon = cfg.horizon if horizon is None else horizon
    if len(meas) < 2:
        raise InsufficientMeasurementsError("forecasting needs at least two measurements")
    fit = fit_monotone_poly(meas, cfg.degree, cfg.grid)
    times = sorted(m.t for m in meas)
    states = assemble_states(fit, times, cam, cam_to_world)
    t_last = float(states.t[-1])
    if mode == "raw":
        p0, v0, t0 = states.p[0], states.v.mean(axis=0), float(states.t[0])
    elif mode == "ekf":
        p0, v0 = ekf_bootstrap(states, physics, jerk_psd=cfg.jerk_psd, pos_sigma=cfg.pos_sigma,
                               vel_sigma=cfg.vel_sigma)
        t0 = t_last
    else:
        raise DataError(f"unknown forecast mode {mode!r}")
    span = t_last + horizon - t0
    if spin is None:
        pred = propagate(p0, v0, physics, cfg.dt, span, t0)
    else:
        pred = propagate_magnus(p0, v0, spin, physics, cfg.dt, span, t0)
    return pred.with_meta(f"single-batch-{mode}", len(meas))


def forecast_online(meas: Sequence[BallMeasurement], physics: PhysicsParams | None = None,
                    cam: CameraModel | None = None, mode: str = "ekf", horizon: float | None = None,
                    cam_to_world=None, config: ForecastConfig | None = None,
                    t_end: float | None = None) -> list[TrajectoryPrediction]:
    """Refit and re-propagate after every new measurement.

    Each prediction uses all measurements so far and runs until ``t_end``
    (default: ``horizon`` after the last measurement of the stream). The
    first prediction is emitted once two measurements are available.
    ``cam_to_world`` may be one rotation or one per measurement.
    """
    physics = physics or PhysicsParams()
    cam = cam or CameraModel()
    cfg = config or ForecastConfig()
    horizon = cfg.horizon if horizon is None else horizon
    order = np.argsort([m.t for m in meas], kind="stable")
    meas = [meas[i] for i in order]
    R = None if cam_to_world is None else _rotations(cam_to_world, len(meas))
    if R is not None and np.ndim(cam_to_world) == 3:
        R = R[order]
    if not meas:
        return []
    t_stop = (meas[-1].t + horizon) if t_end is None else t_end
    out = []
    for k in range(2, len(meas) + 1):
        sub = meas[:k]
        Rk = None if R is None else R[:k]
        h = t_stop - sub[-1].t
        pred = forecast_single_batch(sub, physics, cam, mode, h, Rk, cfg)
        out.append(pred.with_meta(f"online-{mode}", k))
    return out


def impact_or_last(pred: TrajectoryPrediction) -> tuple[np.ndarray, bool]:
    """Impact point if one was found, else the final propagated position."""
    if pred.impact_point is not None:
        return pred.impact_point, True
    return pred.p[-1], False
