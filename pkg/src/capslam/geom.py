"""Rigid-body geometry: SE(3) maps, pinhole projection, motion model.

Conventions
-----------
* A ``Pose`` maps points from its own frame into the parent frame:
  ``x_parent = R @ x_local + t``.  Camera poses are camera-to-world.
* Twists are ``(omega, v)`` with the rotation block applied first in the
  exponential, matching ``exp([w]x) p + V(w) v``.
* Pixel coordinates are ``(x, y)`` with x along image columns; pixel
  centers sit on integer coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, DegenerateRotationError, InvalidDepthError

# Below this rotation magnitude the closed forms switch to their series
# expansions (second order in theta).
SMALL_ANGLE = 1e-8

# Compositions renormalize the rotation after chains of this length to
# bound orthonormality drift.
RENORM_CHAIN = 100


def skew(w: np.ndarray) -> np.ndarray:
    """Cross-product matrix [w]x such that [w]x @ p = w x p."""
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def _polar_rotation(r: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (det +1) in the Frobenius sense."""
    u, _, vt = np.linalg.svd(r)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


@dataclass(frozen=True)
class Twist:
    """Element of se(3): rotation vector (radians) + linear part (meters)."""

    omega: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float).reshape(3))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v, self.omega])

    @staticmethod
    def from_vector(x: np.ndarray) -> "Twist":
        x = np.asarray(x, dtype=float).reshape(6)
        return Twist(omega=x[3:], v=x[:3])

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_vector()))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: 3x3 rotation + translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray
    chain: int = field(default=0, compare=False)

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "Pose") -> "Pose":
        r = self.rotation @ other.rotation
        t = self.rotation @ other.translation + self.translation
        chain = max(self.chain, other.chain) + 1
        if chain >= RENORM_CHAIN:
            r = _polar_rotation(r)
            chain = 0
        return Pose(r, t, chain)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation, self.chain)

    def transform(self, pts: np.ndarray) -> np.ndarray:
        """Apply to one point (3,) or a stack (N, 3)."""
        pts = np.asarray(pts, dtype=float)
        return pts @ self.rotation.T + self.translation

    def rotate(self, vecs: np.ndarray) -> np.ndarray:
        return np.asarray(vecs, dtype=float) @ self.rotation.T

    def orthonormality_error(self) -> float:
        return float(np.abs(self.rotation @ self.rotation.T - np.eye(3)).max())


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera parameters in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def scaled(self, factor: float) -> "Intrinsics":
        """Intrinsics of the same view resampled by ``factor`` (e.g. 0.5)."""
        return Intrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=(self.cx + 0.5) * factor - 0.5,
            cy=(self.cy + 0.5) * factor - 0.5,
            width=int(round(self.width * factor)),
            height=int(round(self.height * factor)),
        )


def exp_map(xi: Twist) -> Pose:
    """SE(3) exponential.  Total on finite twists; series below SMALL_ANGLE."""
    w = xi.omega
    th2 = float(w @ w)
    wx = skew(w)
    wx2 = wx @ wx
    if th2 < SMALL_ANGLE * SMALL_ANGLE:
        a = 1.0 - th2 / 6.0
        b = 0.5 - th2 / 24.0
        c = 1.0 / 6.0 - th2 / 120.0
    else:
        th = math.sqrt(th2)
        a = math.sin(th) / th
        b = (1.0 - math.cos(th)) / th2
        c = (1.0 - a) / th2
    r = np.eye(3) + a * wx + b * wx2
    vmat = np.eye(3) + b * wx + c * wx2
    return Pose(r, vmat @ xi.v)


def log_map(p: Pose) -> Twist:
    """Inverse of :func:`exp_map`.

    Raises
    ------
    DegenerateRotationError
        If the rotation angle exceeds pi - 1e-6.
    """
    r = p.rotation
    cos_th = max(-1.0, min(1.0, (float(np.trace(r)) - 1.0) / 2.0))
    th = math.acos(cos_th)
    if th > math.pi - 1e-6:
        raise DegenerateRotationError(f"rotation angle {th:.6f} too close to pi")
    vee = 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if th < SMALL_ANGLE:
        w = vee * (1.0 + th * th / 6.0)
        k = 1.0 / 12.0 + th * th / 720.0
    else:
        w = vee * (th / math.sin(th))
        a = math.sin(th) / th
        b = (1.0 - math.cos(th)) / (th * th)
        k = (1.0 - a / (2.0 * b)) / (th * th)
    wx = skew(w)
    vinv = np.eye(3) - 0.5 * wx + k * (wx @ wx)
    return Twist(omega=w, v=vinv @ p.translation)


def project(p: np.ndarray, k: Intrinsics) -> np.ndarray:
    """Perspective projection of camera-frame point(s) to pixel coordinates.

    Raises
    ------
    BehindCameraError
        If any z-coordinate is non-positive.
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    pts = np.atleast_2d(p)
    z = pts[:, 2]
    if np.any(z <= 0.0):
        raise BehindCameraError("point has non-positive z")
    u = np.empty((pts.shape[0], 2))
    u[:, 0] = k.fx * pts[:, 0] / z + k.cx
    u[:, 1] = k.fy * pts[:, 1] / z + k.cy
    return u[0] if single else u


def back_project(u: np.ndarray, d, k: Intrinsics) -> np.ndarray:
    """Pixel + depth to camera-frame 3D point(s).

    Raises
    ------
    InvalidDepthError
        If any depth is non-positive.
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    uu = np.atleast_2d(u)
    dd = np.atleast_1d(np.asarray(d, dtype=float))
    if np.any(dd <= 0.0):
        raise InvalidDepthError("depth must be positive")
    p = np.empty((uu.shape[0], 3))
    p[:, 0] = (uu[:, 0] - k.cx) / k.fx * dd
    p[:, 1] = (uu[:, 1] - k.cy) / k.fy * dd
    p[:, 2] = dd
    return p[0] if single else p


def back_project_map(depth: np.ndarray, k: Intrinsics) -> np.ndarray:
    """Dense back-projection of a depth image to an (H, W, 3) point map.

    Invalid (non-positive) pixels yield zero points.
    """
    h, w = depth.shape
    xs = np.arange(w, dtype=float)
    ys = np.arange(h, dtype=float)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.empty((h, w, 3))
    pts[..., 0] = (gx - k.cx) / k.fx * depth
    pts[..., 1] = (gy - k.cy) / k.fy * depth
    pts[..., 2] = depth
    pts[depth <= 0.0] = 0.0
    return pts


def constant_velocity_predict(prev: Pose, prev2: Pose) -> Pose:
    """Replay the last relative motion: prev o exp(log(prev2^-1 o prev))."""
    delta = prev2.inverse().compose(prev)
    return prev.compose(exp_map(log_map(delta)))


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, radians."""
    cos_th = max(-1.0, min(1.0, (float(np.trace(r)) - 1.0) / 2.0))
    return math.acos(cos_th)


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.eye(3)
    return exp_map(Twist(omega=axis / n * angle, v=np.zeros(3))).rotation


def quat_from_rotation(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (x, y, z, w) from a rotation matrix, w >= 0."""
    m = np.asarray(r, dtype=float)
    t = np.trace(m)
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s, 0.25 * s]
        )
    else:
        i = int(np.argmax(np.diag(m)))
        j, kk = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(1.0 + m[i, i] - m[j, j] - m[kk, kk], 0.0)) * 2.0
        q = np.empty(4)
        q[i] = 0.25 * s
        q[j] = (m[j, i] + m[i, j]) / s
        q[kk] = (m[kk, i] + m[i, kk]) / s
        q[3] = (m[kk, j] - m[j, kk]) / s
    q /= np.linalg.norm(q)
    if q[3] < 0.0:
        q = -q
    return q


def rotation_from_quat(q: np.ndarray) -> np.ndarray:
    """Rotation matrix from a quaternion (x, y, z, w)."""
    x, y, z, w = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
