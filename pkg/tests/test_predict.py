from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import minimize

from egopong.core import BallMeasurement, CameraModel, DataError, PhysicsParams, back_project, camera_to_world_rotation, skew
from egopong.predict import (
    InsufficientMeasurementsError,
    PolyFit,
    _design,
    assemble_states,
    ekf_bootstrap,
    ekf_init,
    ekf_step,
    fit_monotone_poly,
    forecast_online,
    forecast_single_batch,
    gyro_rotations,
    impact_or_last,
    process_noise,
    propagate,
    propagate_magnus,
    reject_outliers,
    solve_qp,
    transition,
)
from egopong.synth import ground_truth_measurements, random_forecast_scene

CAM = CameraModel()
NO_TABLE = PhysicsParams(table_height=-100.0)


def _meas(t, z, cx=None, cy=None):
    t = np.asarray(t, dtype=float)
    cx = 320.0 + 10 * t if cx is None else cx
    cy = 240.0 - 5 * t if cy is None else cy
    return [BallMeasurement(float(ti), float(x), float(y), CAM.fx * 0.02 / zi, float(zi))
            for ti, x, y, zi in zip(t, np.broadcast_to(cx, t.shape), np.broadcast_to(cy, t.shape), z)]


def _drag_rhs(physics: PhysicsParams):
    def f(_t, s):
        v = s[3:]
        return np.concatenate([v, physics.g - physics.k_d * np.linalg.norm(v) * v])
    return f


class TestMonotoneFit:
    def test_inactive_constraints_match_normal_equations(self):
        t = np.linspace(0.0, 0.05, 11)
        z = 3.0 - 8.0 * t - 30 * t**2
        fit = fit_monotone_poly(_meas(t, z))
        u = (t - t[0]) / (t[-1] - t[0])
        A = _design(u, 2)
        oracle = np.linalg.solve(A.T @ A, A.T @ z)
        assert np.allclose(fit.beta_z, oracle, atol=1e-9)
        assert np.all(fit.multipliers == 0)

    def test_increasing_data_clamps_to_mean(self):
        t = np.linspace(0.0, 0.05, 11)
        z = 2.0 + 4.0 * t
        fit = fit_monotone_poly(_meas(t, z))
        assert np.allclose(fit.beta_z, [z.mean(), 0.0, 0.0], atol=1e-9)
        # KKT: stationarity A'(A b - z) + G' lam = 0 with lam >= 0
        u = (fit.collocation - fit.t0) / fit.T
        A = _design((t - t[0]) / (t[-1] - t[0]), 2)
        G = np.column_stack([np.zeros_like(u), np.ones_like(u), 2 * u])
        grad = A.T @ (A @ fit.beta_z - z) + G.T @ fit.multipliers
        assert np.allclose(grad, 0.0, atol=1e-9)
        assert np.all(fit.multipliers >= 0)

    @given(st.lists(st.floats(0.5, 5.0), min_size=4, max_size=20), st.integers(1, 3))
    def test_derivative_nonpositive_at_collocation(self, z, degree):
        t = np.linspace(0.0, 0.1, len(z))
        fit = fit_monotone_poly(_meas(t, np.array(z)), degree=degree)
        assert np.all(fit.dz(fit.collocation) * fit.T <= 1e-9)

    @given(st.lists(st.floats(0.5, 5.0), min_size=4, max_size=20))
    def test_objective_not_below_unconstrained(self, z):
        t = np.linspace(0.0, 0.1, len(z))
        z = np.array(z)
        fit = fit_monotone_poly(_meas(t, z))
        A = _design((t - t[0]) / (t[-1] - t[0]), 2)
        free = np.sum((A @ np.linalg.lstsq(A, z, rcond=None)[0] - z) ** 2)
        assert fit.objective >= free - 1e-9

    def test_matches_slsqp(self, rng):
        for _ in range(10):
            t = np.sort(rng.uniform(0.0, 0.1, 12))
            z = 2.5 + rng.normal(0, 0.2, 12) + 3 * (t - 0.05) ** 2 * rng.normal()
            fit = fit_monotone_poly(_meas(t, z))
            u = (t - fit.t0) / fit.T
            A = _design(u, 2)
            uc = (fit.collocation - fit.t0) / fit.T
            G = np.column_stack([np.zeros_like(uc), np.ones_like(uc), 2 * uc])
            res = minimize(lambda b: np.sum((A @ b - z) ** 2), np.array([z.mean(), 0, 0]), method="SLSQP",
                           constraints=[{"type": "ineq", "fun": lambda b: -G @ b}], options={"ftol": 1e-14})
            assert fit.objective <= res.fun + 1e-7

    def test_qp_rejects_infeasible_start(self):
        with pytest.raises(DataError):
            solve_qp(np.eye(2), np.zeros(2), np.eye(2), np.zeros(2), np.ones(2))

    def test_errors(self):
        with pytest.raises(InsufficientMeasurementsError):
            fit_monotone_poly([])
        with pytest.raises(DataError):
            fit_monotone_poly(_meas([0.0, 0.0], [2.0, 2.0]))

    def test_rank_deficiency_lowers_degree(self):
        fit = fit_monotone_poly(_meas([0.0, 0.01], [2.0, 1.9]))
        assert fit.degree == 1


class TestAssembleStates:
    def test_velocity_along_ray(self):
        # fixed image centre, linearly shrinking depth: velocity points along the viewing ray
        t = np.linspace(0.0, 0.04, 9)
        z = 2.5 - 6.0 * t
        fit = fit_monotone_poly(_meas(t, z, cx=400.0, cy=200.0))
        st_ = assemble_states(fit, t, CAM)
        ray = back_project([400.0, 200.0], 1.0, CAM)
        assert np.allclose(st_.v, -6.0 * ray, atol=1e-6)

    def test_rotation_applied(self):
        t = np.linspace(0.0, 0.04, 5)
        fit = fit_monotone_poly(_meas(t, 2.5 - t))
        R = camera_to_world_rotation(0.3)
        a = assemble_states(fit, t, CAM)
        b = assemble_states(fit, t, CAM, R)
        assert np.allclose(b.p, a.p @ R.T)

    def test_single_sample_has_no_velocity(self):
        fit = PolyFit(np.array([320.0]), np.array([240.0]), np.array([2.0]), 0, 0.0, 1.0)
        assert assemble_states(fit, [0.0], CAM).v is None


class TestPropagate:
    def test_no_drag_matches_discrete_closed_form(self):
        phys = PhysicsParams(drag_coeff=0.0, table_height=-100.0)
        p0, v0, dt, n = np.array([0.0, 0.0, 1.0]), np.array([1.0, 4.0, 3.0]), 0.001, 300
        pred = propagate(p0, v0, phys, dt, n * dt)
        k = np.arange(n + 1)[:, None]
        exact = p0 + v0 * k * dt + phys.g * dt * dt * k * (k - 1) / 2
        assert np.allclose(pred.p, exact, atol=1e-12)

    def test_drag_deceleration_at_six_mps(self):
        phys = PhysicsParams(gravity=(0.0, 0.0, 0.0), table_height=-100.0)
        pred = propagate([0, 0, 0], [6.0, 0, 0], phys, 0.001, 0.001)
        decel = -(pred.v[1, 0] - 6.0) / 0.001
        assert decel == pytest.approx(phys.k_d * 36.0, rel=1e-12)
        assert decel == pytest.approx(4.10, abs=0.01)

    def test_bounce_reflects_with_restitution(self):
        phys = PhysicsParams(drag_coeff=0.0, table_height=0.0, restitution_e=0.8)
        pred = propagate([0.0, 0.0, 0.3], [0.0, 2.0, -1.0], phys, 0.001, 0.5)
        assert pred.bounces
        b = pred.bounces[0]
        assert b.v_plus[2] == 0.8 * -b.v_minus[2]
        assert np.array_equal(b.v_plus[:2], b.v_minus[:2])
        assert b.point[2] == 0.0 and pred.impact_time == b.t
        assert np.array_equal(impact_or_last(pred)[0], b.point)

    def test_energy_non_increasing(self):
        phys = NO_TABLE
        pred = propagate([0.0, 0.0, 1.0], [2.0, 6.0, 1.0], phys, 0.001, 0.5)
        energy = 0.5 * np.sum(pred.v**2, axis=1) + 9.81 * pred.p[:, 2]
        # explicit Euler gains O(dt^2) energy per step from gravity alone; drag outweighs it
        assert np.all(np.diff(energy) <= 1e-9)

    def test_first_order_convergence(self):
        p0, v0 = np.array([0.0, 0.0, 1.0]), np.array([1.0, 8.0, 2.0])
        ref = solve_ivp(_drag_rhs(NO_TABLE), (0, 0.5), np.concatenate([p0, v0]), rtol=1e-12, atol=1e-12).y[:3, -1]
        errs = [np.linalg.norm(propagate(p0, v0, NO_TABLE, dt, 0.5).p[-1] - ref) for dt in (0.002, 0.001, 0.0005)]
        assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.1)
        assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.1)

    def test_fine_step_oracle(self):
        # 1 ms steps against a 10 kHz run of the same equations; a few mm over 0.5 s
        p0, v0 = np.array([0.0, 0.0, 1.0]), np.array([1.0, 8.0, 2.0])
        coarse = propagate(p0, v0, NO_TABLE, 0.001, 0.5).p[-1]
        fine = propagate(p0, v0, NO_TABLE, 0.0001, 0.5).p[-1]
        assert np.linalg.norm(coarse - fine) < 5e-3

    def test_invalid_step(self):
        with pytest.raises(DataError):
            propagate([0, 0, 1], [0, 1, 0], dt=0.0)


class TestMagnus:
    def test_zero_spin_bitwise(self):
        a = propagate([0, 0, 1], [1, 5, 1], NO_TABLE, 0.001, 0.3)
        b = propagate_magnus([0, 0, 1], [1, 5, 1], [0, 0, 0], NO_TABLE, 0.001, 0.3)
        assert np.array_equal(a.p, b.p) and np.array_equal(a.v, b.v)

    def test_spin_parallel_to_velocity_no_lift(self):
        phys = PhysicsParams(gravity=(0.0, 0.0, 0.0), table_height=-100.0)
        a = propagate([0, 0, 1], [0, 5, 0], phys, 0.001, 0.3)
        b = propagate_magnus([0, 0, 1], [0, 5, 0], [0, 50, 0], phys, 0.001, 0.3)
        assert np.allclose(a.p, b.p, atol=1e-15)

    def test_topspin_dips(self):
        # ball moving +y; spin about -x gives omega x v pointing down
        a = propagate([0, 0, 1], [0, 6, 0], NO_TABLE, 0.001, 0.3)
        b = propagate_magnus([0, 0, 1], [0, 6, 0], [-100, 0, 0], NO_TABLE, 0.001, 0.3)
        assert b.p[-1, 2] < a.p[-1, 2]
        assert abs(b.p[-1, 0] - a.p[-1, 0]) < 1e-12


class TestEkf:
    def test_zero_step_is_identity(self):
        assert np.array_equal(transition(0.0), np.eye(9))
        assert np.array_equal(process_noise(0.0, 50.0), np.zeros((9, 9)))

    def test_covariance_stays_psd(self, rng):
        phys = PhysicsParams()
        st_ = ekf_init(np.zeros(3), np.array([0.0, 5.0, 1.0]), phys)
        for k in range(1, 101):
            z = np.concatenate([rng.normal(0, 0.02, 3), rng.normal(0, 0.5, 3)])
            st_ = ekf_step(st_, k * 0.005, z)
            assert np.all(np.linalg.eigvalsh(st_.P) >= -1e-9)
            assert np.allclose(st_.P, st_.P.T)
        assert st_.n_updates == 100

    def test_rejects_time_reversal(self):
        st_ = ekf_init(np.zeros(3), np.zeros(3), PhysicsParams(), t0=1.0)
        with pytest.raises(DataError):
            ekf_step(st_, 0.5, np.zeros(6))

    def test_tracks_constant_acceleration(self, rng):
        a = np.array([0.0, -1.0, -9.81])
        t = np.arange(40) * 0.005
        p = np.outer(t, [1.0, 6.0, 2.0]) + 0.5 * np.outer(t**2, a)
        v = np.array([1.0, 6.0, 2.0]) + np.outer(t, a)
        from egopong.predict import MeasuredStates

        noisy = MeasuredStates(t, p + rng.normal(0, 0.005, p.shape), v + rng.normal(0, 0.1, v.shape))
        p_f, v_f = ekf_bootstrap(noisy)
        assert np.linalg.norm(p_f - p[-1]) < 0.01
        assert np.linalg.norm(v_f - v[-1]) < 0.2

    def test_bootstrap_needs_two_states(self):
        from egopong.predict import MeasuredStates

        with pytest.raises(InsufficientMeasurementsError):
            ekf_bootstrap(MeasuredStates(np.zeros(1), np.zeros((1, 3)), None))


class TestForecast:
    @pytest.fixture(scope="class")
    @staticmethod
    def scene():
        return random_forecast_scene(np.random.default_rng(7))

    def test_exact_input_lands_near_truth(self, scene):
        cfg, gt = scene
        meas = ground_truth_measurements(gt, cfg, 200.0, gt.impact_time - 0.18, gt.impact_time - 0.05)
        R = camera_to_world_rotation(cfg.mount_pitch)
        pred = forecast_single_batch(meas, cfg.physics, cfg.cam, "ekf", cam_to_world=R)
        ip, found = impact_or_last(pred)
        assert found
        assert np.linalg.norm(ip[:2] - gt.impact_point[:2]) < 0.1

    def test_online_needs_two_measurements(self, scene):
        cfg, gt = scene
        one = ground_truth_measurements(gt, cfg, 200.0, 0.1, 0.1)
        assert len(one) == 1
        assert forecast_online(one, cfg.physics, cfg.cam) == []
        with pytest.raises(InsufficientMeasurementsError):
            forecast_single_batch(one, cfg.physics, cfg.cam)

    def test_online_one_prediction_per_update(self, scene):
        cfg, gt = scene
        meas = ground_truth_measurements(gt, cfg, 200.0, 0.05, 0.08)
        preds = forecast_online(meas, cfg.physics, cfg.cam, t_end=0.3)
        assert [p.n_updates for p in preds] == list(range(2, len(meas) + 1))
        assert all(p.t[-1] == pytest.approx(0.3, abs=1e-9) for p in preds)

    def test_unknown_mode(self, scene):
        cfg, gt = scene
        meas = ground_truth_measurements(gt, cfg, 200.0, 0.05, 0.08)
        with pytest.raises(DataError):
            forecast_single_batch(meas, mode="nope")


class TestGyroRotations:
    def test_zero_rate_is_mount(self):
        imu = np.array([[0, 0.0, 0.0, 0.0], [5000, 0.0, 0.0, 0.0]])
        R = gyro_rotations(imu, [0.0, 0.003, 0.1], 0.3)
        assert np.allclose(R, camera_to_world_rotation(0.3), atol=1e-12)

    def test_constant_rate_matches_expm(self):
        w = np.array([0.4, -0.3, 0.2])
        imu = np.column_stack([np.arange(0, 100001, 1000), np.tile(w, (101, 1))])
        t = np.array([0.0, 0.0125, 0.07])
        R = gyro_rotations(imu, t, 0.0)
        M = camera_to_world_rotation(0.0)
        for Rk, tk in zip(R, t):
            # camera-to-world after the camera frame has turned by expm([w] t)
            assert np.allclose(Rk, M @ expm(skew(w) * tk).T, atol=1e-9)

    def test_empty(self):
        with pytest.raises(DataError):
            gyro_rotations(np.zeros((0, 4)), [0.0])


class TestRejectOutliers:
    def _track(self):
        t = np.linspace(0.0, 0.1, 15)
        return t, 2.5 - 3 * t, 300 + 200 * t, 250 - 50 * t

    def test_clean_track_kept(self):
        t, z, cx, cy = self._track()
        meas = _meas(t, z, cx, cy)
        assert reject_outliers(meas) == sorted(meas, key=lambda m: m.t)

    @pytest.mark.parametrize("idx", [0, 7, 14])
    def test_single_outlier_removed(self, idx):
        t, z, cx, cy = self._track()
        cx = cx.copy()
        cx[idx] += 40.0
        kept = reject_outliers(_meas(t, z, cx, cy))
        assert len(kept) == 14
        assert t[idx] not in [m.t for m in kept]

    def test_depth_outlier_removed(self):
        t, z, cx, cy = self._track()
        z = z.copy()
        z[5] *= 1.5
        kept = reject_outliers(_meas(t, z, cx, cy))
        assert t[5] not in [m.t for m in kept] and len(kept) == 14

    def test_minimum_kept(self, rng):
        t = np.linspace(0.0, 0.1, 6)
        meas = _meas(t, rng.uniform(1, 4, 6), rng.uniform(0, 600, 6), rng.uniform(0, 400, 6))
        assert len(reject_outliers(meas)) >= 4
