"""Shared domain types, error classes and pinhole camera geometry.

Conventions used throughout the package:

* Event timestamps are integer microseconds since the stream epoch.
* Pixel coordinates are 0-based, ``x`` to the right and ``y`` down.
* The camera frame is the usual optical frame (x right, y down, z forward).
* The world frame is anchored at the camera position at the start of the
  sequence, with ``z`` up and ``y`` pointing forward along the horizontal
  projection of the optical axis. The table plane is ``z = table_height``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class EgopongError(Exception):
    """Base class for all package errors."""


class DataError(EgopongError):
    """Input data is malformed, empty or inconsistent."""


class NumericalError(EgopongError):
    """A numerical routine failed (non-convergence, loss of definiteness)."""


class ConfigError(EgopongError):
    """Configuration is invalid (unknown keys, bad values)."""


class DistortionError(NumericalError):
    pass


class BehindCameraError(DataError):
    pass


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


@dataclass(frozen=True)
class EventWindow:
    """A time-bounded, time-sorted batch of events stored column-wise.

    The interval is half-open when windows tile a stream (``t_start <= t <
    t_end``) so that no event is counted twice; a standalone window may
    include ``t_end``.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    t_start: int
    t_end: int

    def __post_init__(self) -> None:
        if self.t_end <= self.t_start:
            raise DataError(f"window duration must be positive ({self.t_start}..{self.t_end})")

    @classmethod
    def from_arrays(cls, t, x, y, p, t_start: int | None = None, t_end: int | None = None) -> EventWindow:
        t = np.asarray(t, dtype=np.int64)
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        p = np.asarray(p, dtype=np.int8)
        if len(t) > 1 and np.any(np.diff(t) < 0):
            order = np.argsort(t, kind="stable")
            t, x, y, p = t[order], x[order], y[order], p[order]
        if t_start is None:
            t_start = int(t[0]) if len(t) else 0
        if t_end is None:
            t_end = int(t[-1]) + 1 if len(t) else t_start + 1
        return cls(t, x, y, p, int(t_start), int(t_end))

    @classmethod
    def from_events(cls, events, t_start: int | None = None, t_end: int | None = None) -> EventWindow:
        arr = np.array([tuple(e) for e in events], dtype=np.int64).reshape(-1, 4)
        return cls.from_arrays(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], t_start, t_end)

    @property
    def duration(self) -> int:
        return self.t_end - self.t_start

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self):
        for i in range(len(self.t)):
            yield Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def subset(self, mask_or_index) -> EventWindow:
        return EventWindow(
            self.t[mask_or_index],
            self.x[mask_or_index],
            self.y[mask_or_index],
            self.p[mask_or_index],
            self.t_start,
            self.t_end,
        )

    def slice_time(self, t_start: int, t_end: int) -> EventWindow:
        """Events with ``t_start <= t < t_end`` as a new window."""
        lo = np.searchsorted(self.t, t_start, side="left")
        hi = np.searchsorted(self.t, t_end, side="left")
        return EventWindow(self.t[lo:hi], self.x[lo:hi], self.y[lo:hi], self.p[lo:hi], int(t_start), int(t_end))

    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y]).astype(float)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics with a two-coefficient radial distortion model."""

    fx: float = 667.0
    fy: float = 667.0
    cx: float = 320.0
    cy: float = 240.0
    k1: float = 0.0
    k2: float = 0.0
    width: int = 640
    height: int = 480

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ConfigError("principal point must lie inside the sensor")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def has_distortion(self) -> bool:
        return self.k1 != 0.0 or self.k2 != 0.0


class AngularRate(NamedTuple):
    wx: float
    wy: float
    wz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.wx, self.wy, self.wz], dtype=float)


class GazePoint(NamedTuple):
    t: int
    x_et: float
    y_et: float


@dataclass(frozen=True)
class BallMeasurement:
    """One image-space ball observation.

    ``t`` is in seconds on the stream clock (window start plus the batch
    midpoint), so measurements from consecutive windows share a time axis.
    """

    t: float
    cx_img: float
    cy_img: float
    r_img: float
    depth: float
    method: str = "tri-point"
    unreliable: bool = False

    def __post_init__(self) -> None:
        if not (self.r_img > 0 and self.depth > 0):
            raise DataError("measurement radius and depth must be positive")


@dataclass(frozen=True)
class BallState:
    t: float
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray | None = None


@dataclass(frozen=True)
class PhysicsParams:
    """Ball and environment constants. ``k_d`` and ``k_m`` are derived."""

    mass: float = 0.0027
    radius: float = 0.02
    drag_coeff: float = 0.4
    air_density: float = 1.225
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.81)
    restitution_e: float = 0.85
    table_height: float = -0.5
    magnus_coeff: float = 1.0
    k_d: float = field(init=False)
    k_m: float = field(init=False)

    def __post_init__(self) -> None:
        if self.mass <= 0 or self.radius <= 0:
            raise ConfigError("mass and radius must be positive")
        if not 0.0 < self.restitution_e < 1.0:
            raise ConfigError("restitution must lie in (0, 1)")
        area = math.pi * self.radius**2
        object.__setattr__(self, "gravity", tuple(float(g) for g in self.gravity))
        object.__setattr__(self, "k_d", self.drag_coeff * self.air_density * area / (2.0 * self.mass))
        object.__setattr__(
            self, "k_m", self.magnus_coeff * self.air_density * area * self.radius / self.mass
        )

    @property
    def g(self) -> np.ndarray:
        return np.asarray(self.gravity, dtype=float)


# ---------------------------------------------------------------------------
# Camera geometry
# ---------------------------------------------------------------------------

UNDISTORT_MAX_ITER = 100
UNDISTORT_TOL_PX = 1e-9


def _distortion_factor(xn: np.ndarray, yn: np.ndarray, cam: CameraModel) -> np.ndarray:
    r2 = xn * xn + yn * yn
    return 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2


def distort(pt, cam: CameraModel) -> np.ndarray:
    """Apply the forward radial distortion to undistorted pixel coordinates."""
    pt = np.asarray(pt, dtype=float)
    xn = (pt[..., 0] - cam.cx) / cam.fx
    yn = (pt[..., 1] - cam.cy) / cam.fy
    s = _distortion_factor(xn, yn, cam)
    return np.stack([cam.fx * xn * s + cam.cx, cam.fy * yn * s + cam.cy], axis=-1)


def undistort(pt, cam: CameraModel) -> np.ndarray:
    """Invert the radial distortion by fixed-point iteration.

    Accepts a single ``(2,)`` point or an ``(N, 2)`` array.

    Raises:
        DistortionError: if the iteration does not reach 1e-9 px within the
            iteration cap, which only happens for pathological coefficients.
    """
    pt = np.asarray(pt, dtype=float)
    if not cam.has_distortion:
        return pt.copy()
    xd = (pt[..., 0] - cam.cx) / cam.fx
    yd = (pt[..., 1] - cam.cy) / cam.fy
    xn, yn = xd.copy(), yd.copy()
    for _ in range(UNDISTORT_MAX_ITER):
        s = _distortion_factor(xn, yn, cam)
        if np.any(s <= 0):
            break
        xn_new, yn_new = xd / s, yd / s
        step = max(
            float(np.max(np.abs(xn_new - xn), initial=0.0)) * cam.fx,
            float(np.max(np.abs(yn_new - yn), initial=0.0)) * cam.fy,
        )
        xn, yn = xn_new, yn_new
        if step < UNDISTORT_TOL_PX:
            return np.stack([cam.fx * xn + cam.cx, cam.fy * yn + cam.cy], axis=-1)
    raise DistortionError(f"undistortion did not converge (k1={cam.k1}, k2={cam.k2})")


def back_project(pt, depth, cam: CameraModel) -> np.ndarray:
    """Return ``depth * K^-1 [u, v, 1]`` for undistorted pixel coordinates."""
    pt = np.asarray(pt, dtype=float)
    depth = np.asarray(depth, dtype=float)
    if np.any(depth <= 0):
        raise DataError("depth must be positive")
    xn = (pt[..., 0] - cam.cx) / cam.fx
    yn = (pt[..., 1] - cam.cy) / cam.fy
    return np.stack([xn * depth, yn * depth, depth * np.ones_like(xn)], axis=-1)


def project(p, cam: CameraModel, distorted: bool = True) -> np.ndarray:
    """Pinhole projection of camera-frame points, with forward distortion.

    Raises:
        BehindCameraError: if any point has ``z <= 0``.
    """
    p = np.asarray(p, dtype=float)
    z = p[..., 2]
    if np.any(z <= 0):
        raise BehindCameraError("point behind the camera")
    uv = np.stack([cam.fx * p[..., 0] / z + cam.cx, cam.fy * p[..., 1] / z + cam.cy], axis=-1)
    if distorted and cam.has_distortion:
        return distort(uv, cam)
    return uv


def in_bounds(pt, cam: CameraModel) -> np.ndarray:
    pt = np.asarray(pt, dtype=float)
    return (pt[..., 0] >= 0) & (pt[..., 0] < cam.width) & (pt[..., 1] >= 0) & (pt[..., 1] < cam.height)


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------


def skew(w) -> np.ndarray:
    wx, wy, wz = np.asarray(w, dtype=float)
    return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])


def camera_to_world_rotation(pitch: float = 0.0) -> np.ndarray:
    """Rotation taking camera-frame vectors to the z-up world frame.

    ``pitch`` tilts the optical axis down by the given angle (radians).
    """
    # level mount: camera x -> world x, camera y (down) -> world -z, camera z -> world y
    level = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    c, s = math.cos(pitch), math.sin(pitch)
    # pitch down about the world x axis
    tilt = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    return tilt.T @ level if pitch else level
