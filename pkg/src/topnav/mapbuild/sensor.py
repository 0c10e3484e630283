"""Pinhole RGB-D sensor simulated by ray marching a scene's column heightfield.

Camera frame convention: x right, y down, z forward. World frame: X and Z
span the floor plane (X along map columns, Z along map rows), Y points up.
Depth is the camera-frame z of the hit point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import Scene


class PoseError(ValueError):
    pass


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    @classmethod
    def from_fov(cls, width: int = 48, height: int = 36, hfov_deg: float = 90.0) -> "Intrinsics":
        f = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
        return cls(f, f, width / 2.0, height / 2.0, width, height)

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class SensorConfig:
    intrinsics: Intrinsics = Intrinsics.from_fov()
    max_range: float = 8.0  # meters of depth
    step: float = 0.05  # marching step in depth units
    camera_height: float = 1.5
    pitch_deg: float = 30.0  # downward tilt
    refine_iters: int = 24


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray  # (3, 3) camera-to-world
    translation: np.ndarray  # (3,)

    def check(self, atol: float = 1e-9) -> None:
        R = np.asarray(self.rotation, dtype=np.float64)
        if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=atol) or abs(np.linalg.det(R) - 1.0) > atol:
            raise PoseError("rotation is not proper orthonormal")


def look_pose(x: float, z: float, yaw: float, height: float = 1.5, pitch: float = 0.0) -> Pose:
    """Camera at world ``(x, height, z)`` looking along heading ``yaw`` (radians from +X towards +Z),
    tilted down by ``pitch`` radians."""
    forward = np.array([math.cos(yaw) * math.cos(pitch), -math.sin(pitch), math.sin(yaw) * math.cos(pitch)])
    right = np.array([-math.sin(yaw), 0.0, math.cos(yaw)])
    down = np.cross(forward, right)
    R = np.stack([right, down, forward], axis=1)
    return Pose(R, np.array([x, height, z], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class CameraFrame:
    pose: Pose
    intrinsics: Intrinsics
    depth: np.ndarray  # (h, w) float, NaN where invalid
    color: np.ndarray  # (h, w, 3) uint8
    label: np.ndarray  # (h, w) uint8

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.depth)


def pixel_rays(K: Intrinsics) -> np.ndarray:
    """Camera-frame rays ``K^-1 [u, v, 1]`` for every pixel, shape ``(h*w, 3)`` with z = 1."""
    v, u = np.mgrid[0:K.height, 0:K.width].astype(np.float64)
    x = (u - K.cx) / K.fx
    y = (v - K.cy) / K.fy
    return np.stack([x.ravel(), y.ravel(), np.ones(u.size)], axis=1)


def _solid(scene: Scene, pts: np.ndarray) -> np.ndarray:
    """True where world points lie inside a column or below the floor plane."""
    res = scene.config.resolution
    n = scene.config.cells
    c = np.floor(pts[..., 0] / res).astype(np.int64)
    r = np.floor(pts[..., 2] / res).astype(np.int64)
    outside = (r < 0) | (r >= n) | (c < 0) | (c >= n)
    rc = np.clip(r, 0, n - 1)
    cc = np.clip(c, 0, n - 1)
    top = scene.heights[rc, cc]
    below_top = pts[..., 1] < top
    below_floor = pts[..., 1] <= scene.h_floor
    return outside | below_top | below_floor


def render_frame(scene: Scene, pose: Pose, sensor: SensorConfig | None = None) -> CameraFrame:
    sensor = sensor or SensorConfig()
    K = sensor.intrinsics
    R = np.asarray(pose.rotation, dtype=np.float64)
    origin = np.asarray(pose.translation, dtype=np.float64)
    if _solid(scene, origin[None, :]).any():
        raise PoseError("camera inside a solid column")
    dirs = pixel_rays(K) @ R.T  # world direction per unit depth
    t = np.arange(1, int(math.ceil(sensor.max_range / sensor.step)) + 1) * sensor.step
    pts = origin[None, None, :] + t[:, None, None] * dirs[None, :, :]
    hit = _solid(scene, pts)
    any_hit = hit.any(axis=0)
    first = np.argmax(hit, axis=0)
    n_rays = dirs.shape[0]
    depth = np.full(n_rays, np.nan)
    color = np.zeros((n_rays, 3), dtype=np.uint8)
    label = np.zeros(n_rays, dtype=np.uint8)
    idx = np.nonzero(any_hit)[0]
    if idx.size:
        hi = t[first[idx]]
        lo = np.where(first[idx] > 0, t[np.maximum(first[idx] - 1, 0)], 0.0)
        d = dirs[idx]
        for _ in range(sensor.refine_iters):
            mid = 0.5 * (lo + hi)
            inside = _solid(scene, origin[None, :] + mid[:, None] * d)
            hi = np.where(inside, mid, hi)
            lo = np.where(inside, lo, mid)
        # hi is the first sampled depth inside the surface, so the point lands in the hit cell
        p = origin[None, :] + hi[:, None] * d
        res = scene.config.resolution
        n = scene.config.cells
        c = np.clip(np.floor(p[:, 0] / res).astype(np.int64), 0, n - 1)
        r = np.clip(np.floor(p[:, 2] / res).astype(np.int64), 0, n - 1)
        depth[idx] = hi
        label[idx] = scene.labels[r, c]
        color[idx] = scene.colors[r, c]
    shape = (K.height, K.width)
    return CameraFrame(pose, K, depth.reshape(shape), color.reshape(shape + (3,)), label.reshape(shape))


def backproject(frame: CameraFrame) -> "LabeledPointCloud":
    """World points ``T * (d * K^-1 [u, v, 1])`` for every valid pixel."""
    frame.pose.check()
    K = frame.intrinsics
    valid = frame.valid.ravel()
    rays = pixel_rays(K)[valid]
    d = frame.depth.ravel()[valid]
    cam = rays * d[:, None]
    world = cam @ np.asarray(frame.pose.rotation).T + np.asarray(frame.pose.translation)[None, :]
    return LabeledPointCloud(
        xyz=world,
        color=frame.color.reshape(-1, 3)[valid],
        label=frame.label.ravel()[valid],
    )


@dataclass(frozen=True, eq=False)
class LabeledPointCloud:
    xyz: np.ndarray  # (N, 3) world meters
    color: np.ndarray  # (N, 3) uint8
    label: np.ndarray  # (N,) uint8

    def __len__(self):
        return len(self.label)

    @staticmethod
    def concat(clouds) -> "LabeledPointCloud":
        clouds = list(clouds)
        if not clouds:
            return LabeledPointCloud(np.zeros((0, 3)), np.zeros((0, 3), np.uint8), np.zeros(0, np.uint8))
        return LabeledPointCloud(
            np.concatenate([c.xyz for c in clouds]),
            np.concatenate([c.color for c in clouds]),
            np.concatenate([c.label for c in clouds]),
        )
