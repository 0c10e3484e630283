"""Training-time augmentation: one rigid 2D transform shared by maps and episode, plus RGB jitter."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

from ..gridmap import MapBundle, cell_center
from ..planner import PlannerError, geodesic_path, metric_length
from .episodes import Episode, yaw_quaternion


class AugmentRejected(ValueError):
    """The transformed start or goal left the frame or landed off free space."""


MAX_ROTATION = 15.0
MAX_TRANSLATION = 0.15
MAX_JITTER = 0.30
MAX_HUE = 0.10


@dataclass(frozen=True)
class AugmentParams:
    rotation: float = 0.0  # degrees
    shift_x: float = 0.0  # fraction of the width, along columns
    shift_z: float = 0.0  # fraction of the height, along rows
    brightness: float = 1.0
    contrast: float = 1.0
    saturation: float = 1.0
    hue: float = 0.0  # fraction of the hue circle

    def __post_init__(self):
        tol = 1e-12  # 1 - 0.7 is not exactly 0.3
        checks = (
            abs(self.rotation) <= MAX_ROTATION + tol,
            max(abs(self.shift_x), abs(self.shift_z)) <= MAX_TRANSLATION + tol,
            all(abs(v - 1.0) <= MAX_JITTER + tol for v in (self.brightness, self.contrast, self.saturation)),
            abs(self.hue) <= MAX_HUE + tol,
        )
        if not all(checks):
            raise ValueError(f"augmentation parameters out of range: {self}")

    @property
    def is_rigid_identity(self) -> bool:
        return self.rotation == 0.0 and self.shift_x == 0.0 and self.shift_z == 0.0

    @property
    def is_color_identity(self) -> bool:
        return self.brightness == 1.0 and self.contrast == 1.0 and self.saturation == 1.0 and self.hue == 0.0

    @classmethod
    def sample(cls, rng: np.random.Generator, geometric: bool = True, color: bool = True) -> "AugmentParams":
        u = rng.uniform
        geo = dict(rotation=u(-MAX_ROTATION, MAX_ROTATION),
                   shift_x=u(-MAX_TRANSLATION, MAX_TRANSLATION),
                   shift_z=u(-MAX_TRANSLATION, MAX_TRANSLATION)) if geometric else {}
        col = dict(brightness=u(1 - MAX_JITTER, 1 + MAX_JITTER),
                   contrast=u(1 - MAX_JITTER, 1 + MAX_JITTER),
                   saturation=u(1 - MAX_JITTER, 1 + MAX_JITTER),
                   hue=u(-MAX_HUE, MAX_HUE)) if color else {}
        return cls(**geo, **col)


def jitter_rgb(rgb: np.ndarray, p: AugmentParams) -> np.ndarray:
    """Brightness, contrast, saturation, then hue, in that fixed order."""
    if p.is_color_identity:
        return rgb.copy()
    x = rgb.astype(np.float64) / 255.0
    x = np.clip(x * p.brightness, 0.0, 1.0)
    gray = (x @ np.array([0.299, 0.587, 0.114])).mean()
    x = np.clip(gray + (x - gray) * p.contrast, 0.0, 1.0)
    luma = (x @ np.array([0.299, 0.587, 0.114]))[..., None]
    x = np.clip(luma + (x - luma) * p.saturation, 0.0, 1.0)
    hsv = rgb_to_hsv(x)
    hsv[..., 0] = (hsv[..., 0] + p.hue) % 1.0
    x = hsv_to_rgb(hsv)
    return np.clip(np.rint(x * 255.0), 0, 255).astype(np.uint8)


class _Rigid:
    """Rotation about the map center followed by a shift, in continuous pixel coordinates."""

    def __init__(self, p: AugmentParams, h: int, w: int):
        th = math.radians(p.rotation)
        self.cos, self.sin = math.cos(th), math.sin(th)
        self.cr, self.cc = h / 2.0, w / 2.0
        self.tr, self.tc = p.shift_z * h, p.shift_x * w

    def forward(self, r, c):
        dr, dc = r - self.cr, c - self.cc
        return (self.sin * dc + self.cos * dr + self.cr + self.tr,
                self.cos * dc - self.sin * dr + self.cc + self.tc)

    def inverse(self, r, c):
        dr, dc = r - self.cr - self.tr, c - self.cc - self.tc
        return (-self.sin * dc + self.cos * dr + self.cr,
                self.cos * dc + self.sin * dr + self.cc)


def warp_bundle(bundle: MapBundle, p: AugmentParams) -> MapBundle:
    h, w = bundle.meta.shape
    rgb = bundle.rgb
    if not p.is_rigid_identity:
        T = _Rigid(p, h, w)
        rr, cc = np.indices((h, w), dtype=np.float64)
        sr, sc = T.inverse(rr + 0.5, cc + 0.5)
        sr, sc = np.floor(sr).astype(np.int64), np.floor(sc).astype(np.int64)
        inside = (sr >= 0) & (sr < h) & (sc >= 0) & (sc < w)
        sr, sc = np.clip(sr, 0, h - 1), np.clip(sc, 0, w - 1)
        # out-of-frame cells become void / obstacle / black
        sem = np.where(inside, bundle.sem[sr, sc], 0).astype(np.uint8)
        occ = np.where(inside, bundle.occ[sr, sc], 0).astype(np.uint8)
        rgb = np.where(inside[..., None], bundle.rgb[sr, sc], 0).astype(np.uint8)
        bundle = bundle.with_maps(sem=sem, occ=occ)
    return bundle.with_maps(rgb=jitter_rgb(rgb, p))


def augment_episode(episode: Episode, bundle: MapBundle, params: AugmentParams | None = None,
                    seed: int = 0) -> tuple[Episode, MapBundle]:
    """Apply ``params`` (sampled from ``seed`` when omitted) to the maps and the episode.

    The route is recomputed as the geodesic on the warped occupancy so every
    waypoint stays on a free, 8-adjacent cell.
    """
    if params is None:
        params = AugmentParams.sample(np.random.default_rng(seed))
    out = warp_bundle(bundle, params)
    if params.is_rigid_identity:
        return replace(episode, waypoints=list(episode.waypoints)), out
    h, w = bundle.meta.shape
    T = _Rigid(params, h, w)

    def move(cell):
        r, c = T.forward(cell[0] + 0.5, cell[1] + 0.5)
        r, c = math.floor(r), math.floor(c)
        if not (0 <= r < h and 0 <= c < w):
            raise AugmentRejected(f"cell {cell} leaves the frame")
        if out.occ[r, c] != 1:
            raise AugmentRejected(f"cell {cell} lands on an obstacle")
        return (r, c)

    start, goal = move(episode.start), move(episode.goal)
    try:
        waypoints = geodesic_path(out.occ, start, goal)
    except PlannerError as exc:
        raise AugmentRejected(str(exc)) from exc
    w0, x0, y0, z0 = episode.r0
    yaw = 2.0 * math.atan2(y0, w0) + math.radians(params.rotation)
    return replace(
        episode,
        p0=cell_center(start[0], start[1], out.meta),
        r0=yaw_quaternion(yaw),
        waypoints=waypoints,
        geodesic=metric_length(waypoints, out.meta.meters_per_pixel),
    ), out
