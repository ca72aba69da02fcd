from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from egopong.core import DataError
from egopong.detect import DetectionResult
from egopong.evalharness import (
    DetectionEval,
    ForecastProtocol,
    ImpactEval,
    bench_latency,
    checkpoint_medians,
    eval_detection,
    eval_impact,
    impact_rows,
    run_forecast_protocol,
    sensing_latency,
    sensing_latency_grid,
)
from egopong.predict import TrajectoryPrediction


def _hit(center, t_us=1000.0) -> DetectionResult:
    return DetectionResult(True, "ok", np.asarray(center, dtype=float), 5.0, 1.0, t_us)


def _pred(impact) -> TrajectoryPrediction:
    z = np.zeros((1, 3))
    ip = None if impact is None else np.asarray(impact, dtype=float)
    return TrajectoryPrediction(np.zeros(1), z + [0, 0, 1], z, ip, None if impact is None else 0.1)


class TestDetectionEval:
    def test_strict_radius(self):
        gt = lambda t: np.array([100.0, 100.0])  # noqa: E731
        ev = eval_detection([_hit([104.9, 100.0]), _hit([105.0, 100.0]), DetectionResult(False, "empty")], gt)
        assert ev.success.tolist() == [True, False, False]
        assert ev.rate == pytest.approx(1 / 3)
        assert math.isinf(ev.errors[2])

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            eval_detection([_hit([0, 0])], [lambda t: np.zeros(2)] * 2)

    @given(st.permutations(list(range(8))))
    def test_rate_permutation_invariant(self, perm):
        errs = np.array([0.5, 6.0, 4.99, 5.0, np.inf, 1.0, 10.0, 2.0])
        assert DetectionEval(errs[list(perm)]).rate == DetectionEval(errs).rate == 0.5


class TestImpactEval:
    @given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
    def test_constant_bias(self, bx, by, bz):
        gts = [np.array([x, 1.0 + x, 0.0]) for x in np.linspace(-0.3, 0.3, 7)]
        preds = [_pred(g + [bx, by, bz]) for g in gts]
        ev = eval_impact(preds, gts)
        assert ev.rmse == pytest.approx(math.hypot(bx, by), abs=1e-12)
        assert ev.sigma == pytest.approx(0.0, abs=1e-12)

    @given(st.permutations(list(range(5))))
    def test_permutation_invariant(self, perm):
        gts = [np.array([0.0, k, 0.0]) for k in range(5)]
        preds = [_pred(g + [0.1 * k, 0.0, 0.0]) for k, g in enumerate(gts)]
        base = eval_impact(preds, gts)
        shuf = eval_impact([preds[i] for i in perm], [gts[i] for i in perm])
        assert shuf.rmse == pytest.approx(base.rmse, rel=1e-12)
        assert shuf.median == base.median

    def test_missing_impact_scores_last_position(self):
        ev = eval_impact([_pred(None)], [np.array([3.0, 4.0, 0.0])])
        assert ev.errors[0] == pytest.approx(5.0) and not ev.found[0]

    def test_rows(self):
        ev = ImpactEval(np.array([0.1, 0.3]), np.array([True, True]))
        rows = impact_rows({"a": ev, "online_curve": np.zeros((1, 1))})
        assert len(rows) == 1 and rows[0]["rmse_m"] == pytest.approx(math.sqrt(0.05))


class TestForecastProtocol:
    def test_small_protocol_runs(self):
        cells = run_forecast_protocol(ForecastProtocol(n_trials=3, seed=9))
        assert {"online_200_ekf", "online_30_raw", "single_10ms_ekf_gt", "single_33ms_raw"} <= set(cells)
        curve = cells["online_curve"]
        assert curve.shape[0] == 3 and curve.shape[1] > 16

    def test_checkpoint_medians(self):
        curve = np.array([[5.0, 4.0, 3.0, 2.0], [7.0, 6.0, 5.0, 4.0]])
        assert checkpoint_medians(curve, (2, 4, 9)) == [(2, 6.0), (4, 4.0), (5, 3.0)]


class TestSensingLatency:
    def test_example(self):
        tau = sensing_latency(8.0, 2.0, 0.02, 667.0, 1.0)
        assert tau == pytest.approx(4.0 / (8.0 * (667 * 0.02 + 2.0)), rel=1e-12)
        assert tau == pytest.approx(0.0326, abs=1e-4)

    @given(st.floats(0.5, 20), st.floats(0.5, 20), st.floats(0.3, 5), st.floats(100, 2000))
    def test_monotone_in_speed_and_focal(self, v1, v2, d, f):
        if v1 == v2:
            return
        lo, hi = sorted((v1, v2))
        assert sensing_latency(hi, d, f=f) < sensing_latency(lo, d, f=f)
        assert sensing_latency(lo, d, f=f * 1.1) < sensing_latency(lo, d, f=f)

    def test_invalid(self):
        with pytest.raises(DataError):
            sensing_latency(0.0, 2.0)

    def test_grid_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        sensing_latency_grid([1.0, 2.0], [4.0, 8.0], a)
        sensing_latency_grid([1.0, 2.0], [4.0, 8.0], b)
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_text().strip().splitlines()) == 5


class TestBench:
    def test_needs_100_windows(self, detection_samples):
        with pytest.raises(DataError):
            bench_latency(detection_samples[:99])

    def test_paired_subset(self, detection_samples):
        rep = bench_latency(detection_samples[:100])
        assert len(rep.roi_events) == len(rep.no_roi_events) == 100
        assert np.all(rep.roi_events <= rep.no_roi_events)
        assert sum(rep.roi[s].share_pct for s in ("motion_comp", "threshold", "cluster")) == pytest.approx(100.0)
