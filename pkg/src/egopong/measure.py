"""Image-space ball measurements: temporal batching, circle fitting, depth.

Each detection window's ball events are split into ``M`` equal temporal
batches. For every batch the undistorted event pixels are reduced to their
convex hull, the three hull vertices with the largest pairwise-distance sum
define a circumcircle, and the radius gives metric depth through
``Z = f W / r``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .core import BallMeasurement, CameraModel, DataError, EventWindow, NumericalError, undistort
from .defaults import BALL_RADIUS

log = logging.getLogger(__name__)

TRIANGLE_AREA_EPS = 1e-12
UNRELIABLE_RADIUS_PX = 1.0


class DegenerateBatchError(DataError):
    pass


class SingularSystemError(NumericalError):
    pass


class NoMeasurementError(DataError):
    pass


@dataclass(frozen=True)
class Batch:
    index: int  # 1-based
    t_us: np.ndarray  # absolute timestamps
    xy: np.ndarray  # (n, 2) undistorted pixel coordinates
    t_mid: float  # seconds after the window start

    def __len__(self) -> int:
        return len(self.t_us)


@dataclass(frozen=True)
class CircleFit:
    center: np.ndarray
    radius: float
    method: str
    residual: float = 0.0

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise DataError("circle radius must be positive")


def partition_batches(ball: EventWindow, M: int, cam: CameraModel | None = None) -> list[Batch]:
    """Split ``ball`` into ``M`` equal batches over ``[0, T]``.

    Batch ``m`` holds ``(m-1)T/M <= t < mT/M``; an event at exactly ``T``
    goes to batch ``M``. Integer arithmetic keeps boundaries exact. Empty
    batches are returned and left to the caller to skip.
    """
    if M < 1:
        raise DataError("M must be at least 1")
    if len(ball) == 0:
        raise DataError("no ball events to partition")
    T = ball.duration
    rel = ball.t - ball.t_start
    idx = np.clip((rel * M) // T, 0, M - 1)
    xy = ball.xy()
    if cam is not None and cam.has_distortion:
        xy = undistort(xy, cam)
    T_s = T * 1e-6
    out = []
    for m in range(M):
        sel = idx == m
        out.append(Batch(m + 1, ball.t[sel], xy[sel], (2 * m + 1) * T_s / (2 * M)))
    return out


def hull_vertices(points: np.ndarray) -> np.ndarray:
    """Convex-hull vertices of the unique points, in ascending index order.

    Raises:
        DegenerateBatchError: fewer than three unique points or all collinear.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        raise DegenerateBatchError(f"need 3 distinct points, got {len(pts)}")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateBatchError("collinear batch") from exc
    return pts[np.sort(hull.vertices)]


@lru_cache(maxsize=256)
def _triples(n: int) -> np.ndarray:
    """All index triples ``i < j < k`` below ``n`` in lexicographic order."""
    out = np.array(list(combinations(range(n), 3)), dtype=np.intp).reshape(-1, 3)
    out.setflags(write=False)
    return out


def best_triple(verts: np.ndarray) -> np.ndarray:
    """Indices of the triple maximising the pairwise-distance sum (first on ties)."""
    dist = np.linalg.norm(verts[:, None, :] - verts[None, :, :], axis=2)
    triples = _triples(len(verts))
    i, j, k = triples.T
    return triples[int(np.argmax(dist[i, j] + dist[j, k] + dist[i, k]))]


def pick_tri_points(points: np.ndarray) -> np.ndarray:
    """Hull-vertex triple with the largest sum of pairwise distances.

    Ties keep the lexicographically first triple of vertex indices.
    """
    verts = hull_vertices(points)
    return verts[best_triple(verts)]


def fit_circle_3pt(p1, p2, p3) -> CircleFit:
    """Exact circumcircle through three points."""
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    a, b = p2 - p1, p3 - p1
    cross = a[0] * b[1] - a[1] * b[0]
    if abs(cross) / 2.0 <= TRIANGLE_AREA_EPS:
        raise SingularSystemError("points are collinear")
    # 2 [a; b] c' = [|a|^2; |b|^2] with c' relative to p1
    A = 2.0 * np.array([a, b])
    rhs = np.array([a @ a, b @ b])
    c_rel = np.linalg.solve(A, rhs)
    center = p1 + c_rel
    r = float(np.linalg.norm(c_rel))
    d = np.linalg.norm(np.array([p1, p2, p3]) - center, axis=1)
    return CircleFit(center, r, "tri-point", float(np.max(np.abs(d - r))))


def fit_circle_taubin(points) -> CircleFit:
    """Taubin algebraic circle fit (SVD formulation)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(np.unique(pts, axis=0)) < 3:
        raise DegenerateBatchError("Taubin fit needs 3 distinct points")
    mean = pts.mean(axis=0)
    X, Y = (pts - mean).T
    Z = X * X + Y * Y
    z_mean = Z.mean()
    if z_mean <= 0:
        raise DegenerateBatchError("zero spread")
    z0 = (Z - z_mean) / (2.0 * math.sqrt(z_mean))
    _, s, vt = np.linalg.svd(np.column_stack([z0, X, Y]), full_matrices=False)
    A = vt[2].copy()
    if abs(A[0]) < 1e-14:
        raise DegenerateBatchError("points are collinear")
    A[0] /= 2.0 * math.sqrt(z_mean)
    A3 = -z_mean * A[0]
    center = mean - A[1:3] / (2.0 * A[0])
    r = math.sqrt(A[1] ** 2 + A[2] ** 2 - 4 * A[0] * A3) / (2.0 * abs(A[0]))
    res = float(np.sqrt(np.mean((np.linalg.norm(pts - center, axis=1) - r) ** 2)))
    return CircleFit(center, r, "taubin", res)


def fit_ellipse_pca(points) -> CircleFit:
    """Ellipse from the point covariance; the semi-major axis is the radius.

    For points spread uniformly on a circle the variance along any axis is
    ``r^2 / 2``, hence the ``sqrt(2 lambda)`` scaling.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise DegenerateBatchError("PCA fit needs 2 points")
    mean = pts.mean(axis=0)
    lam = np.linalg.eigvalsh(np.cov((pts - mean).T, bias=True))
    if lam[-1] <= 1e-12:
        raise DegenerateBatchError("degenerate covariance")
    r = math.sqrt(2.0 * lam[-1])
    minor = math.sqrt(2.0 * max(lam[0], 0.0))
    return CircleFit(mean, r, "ellipse-pca", r - minor)


def fit_batch(points: np.ndarray, method: str = "tri-point") -> CircleFit:
    if method == "tri-point":
        return fit_circle_3pt(*pick_tri_points(points))
    if method == "taubin":
        return fit_circle_taubin(points)
    if method == "ellipse-pca":
        return fit_ellipse_pca(points)
    raise DataError(f"unknown fit method {method!r}")


def depth_from_radius(r_img: float, cam: CameraModel, radius_m: float = BALL_RADIUS) -> float:
    """Metric depth of a sphere of radius ``radius_m`` imaged with radius ``r_img``."""
    if not r_img > 0:
        raise DataError("image radius must be positive")
    if cam.fx != cam.fy:
        log.debug("non-square pixels: using fx for depth")
    return cam.fx * radius_m / r_img


def measure_window(ball: EventWindow, M: int, cam: CameraModel, radius_m: float = BALL_RADIUS,
                   method: str = "tri-point") -> list[BallMeasurement]:
    """Per-batch measurements, sorted by time; degenerate batches are skipped.

    Raises:
        NoMeasurementError: if every batch is empty or degenerate.
    """
    out = []
    for batch in partition_batches(ball, M, cam):
        if len(batch) == 0:
            log.warning("batch %d of %d is empty", batch.index, M)
            continue
        try:
            fit = fit_batch(batch.xy, method)
        except (DegenerateBatchError, SingularSystemError) as exc:
            log.warning("batch %d skipped: %s", batch.index, exc)
            continue
        depth = depth_from_radius(fit.radius, cam, radius_m)
        unreliable = fit.radius < UNRELIABLE_RADIUS_PX
        if unreliable:
            log.warning("batch %d radius %.3f px below 1 px; depth unreliable", batch.index, fit.radius)
        t = ball.t_start * 1e-6 + batch.t_mid
        out.append(BallMeasurement(t, float(fit.center[0]), float(fit.center[1]), fit.radius, depth, method,
                                   unreliable))
    if not out:
        raise NoMeasurementError("all batches degenerate")
    return out
