"""Top-down map containers, the semantic vocabulary and pixel/world math.

Pixel ``(r, c)`` has world coordinates ``X = origin_x + c * s`` and
``Z = origin_z + r * s`` where ``s`` is the cell size in meters; world to
pixel is the floor of the inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

NUM_CLASSES = 41
VOID = 0
WALL = 1
FLOOR = 2

SEMANTIC_CLASSES = (
    "void", "wall", "floor", "chair", "door", "table", "picture", "cabinet",
    "cushion", "window", "sofa", "bed", "curtain", "chest_of_drawers", "plant",
    "sink", "stairs", "ceiling", "toilet", "stool", "towel", "mirror",
    "tv_monitor", "shower", "column", "bathtub", "counter", "fireplace",
    "lighting", "beam", "railing", "shelving", "blinds", "gym_equipment",
    "seating", "board_panel", "furniture", "appliances", "clothes", "objects",
    "misc",
)
assert len(SEMANTIC_CLASSES) == NUM_CLASSES

MODALITIES = ("rgb", "occ", "sem")
DEFAULT_SEM_DIM = 8
DEFAULT_METERS_PER_PIXEL = 0.05

# Relative slack used to snap quotients that are a rounding error away from
# an integer, so lattice points round-trip exactly.
_SNAP_RTOL = 1e-9


class MapError(ValueError):
    """Raised for out-of-extent coordinates and malformed map data."""


@dataclass(frozen=True)
class MapMeta:
    meters_per_pixel: float
    origin_x: float
    origin_z: float
    height: int
    width: int

    def __post_init__(self):
        if not self.meters_per_pixel > 0:
            raise MapError(f"meters_per_pixel must be positive, got {self.meters_per_pixel}")
        if self.height < 1 or self.width < 1:
            raise MapError(f"map must be at least 1x1, got {self.height}x{self.width}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def contains_cell(self, r: int, c: int) -> bool:
        return 0 <= r < self.height and 0 <= c < self.width


def pixel_to_world(r: int, c: int, meta: MapMeta) -> tuple[float, float]:
    """Return the world ``(X, Z)`` of the top-left corner of cell ``(r, c)``."""
    if not meta.contains_cell(r, c):
        raise MapError(f"cell ({r}, {c}) outside {meta.height}x{meta.width} map")
    s = meta.meters_per_pixel
    return (meta.origin_x + c * s, meta.origin_z + r * s)


def _floor_index(value: float) -> int:
    nearest = round(value)
    if abs(value - nearest) <= _SNAP_RTOL * max(1.0, abs(value)):
        return int(nearest)
    return math.floor(value)


def world_to_pixel(x: float, z: float, meta: MapMeta) -> tuple[int, int]:
    """Return the cell ``(r, c)`` containing world point ``(x, z)``."""
    s = meta.meters_per_pixel
    c = _floor_index((x - meta.origin_x) / s)
    r = _floor_index((z - meta.origin_z) / s)
    if not meta.contains_cell(r, c):
        raise MapError(f"world point ({x}, {z}) outside map extent")
    return (r, c)


def world_to_pixel_array(xz: np.ndarray, meta: MapMeta, snap: bool = True) -> np.ndarray:
    """Vectorized floor mapping without bounds checks; returns ``(N, 2)`` rows/cols.

    With ``snap=False`` this is a plain floor, which is what point projection
    wants: surface hits sit a hair inside their cell and must stay there.
    """
    xz = np.asarray(xz, dtype=np.float64)
    s = meta.meters_per_pixel
    q = np.stack([(xz[:, 1] - meta.origin_z) / s, (xz[:, 0] - meta.origin_x) / s], axis=1)
    if not snap:
        return np.floor(q).astype(np.int64)
    nearest = np.round(q)
    close = np.abs(q - nearest) <= _SNAP_RTOL * np.maximum(1.0, np.abs(q))
    return np.where(close, nearest, np.floor(q)).astype(np.int64)


def cell_center(r: int, c: int, meta: MapMeta) -> tuple[float, float]:
    s = meta.meters_per_pixel
    return (meta.origin_x + (c + 0.5) * s, meta.origin_z + (r + 0.5) * s)


@dataclass(frozen=True, eq=False)
class MapBundle:
    """Co-registered RGB (H, W, 3) uint8, occupancy (H, W) uint8 and semantic (H, W) uint8 grids."""

    rgb: np.ndarray
    occ: np.ndarray
    sem: np.ndarray
    meta: MapMeta

    def __post_init__(self):
        h, w = self.meta.shape
        if self.rgb.shape != (h, w, 3) or self.occ.shape != (h, w) or self.sem.shape != (h, w):
            raise MapError(
                f"map shapes {self.rgb.shape}, {self.occ.shape}, {self.sem.shape} "
                f"do not match meta {h}x{w}"
            )
        if self.rgb.dtype != np.uint8 or self.occ.dtype != np.uint8 or self.sem.dtype != np.uint8:
            raise MapError("map grids must be uint8")
        if self.occ.max(initial=0) > 1:
            raise MapError("occupancy values must be 0 or 1")
        if self.sem.max(initial=0) >= NUM_CLASSES:
            raise MapError(f"semantic ids must be < {NUM_CLASSES}")

    def with_maps(self, **changes) -> "MapBundle":
        return replace(self, **changes)

    def equals(self, other: "MapBundle") -> bool:
        return (
            self.meta == other.meta
            and np.array_equal(self.rgb, other.rgb)
            and np.array_equal(self.occ, other.occ)
            and np.array_equal(self.sem, other.sem)
        )


@dataclass(frozen=True, eq=False)
class ProbabilityPair:
    path: np.ndarray
    goal: np.ndarray
    meta: MapMeta | None = None

    def __post_init__(self):
        if self.path.shape != self.goal.shape or self.path.ndim != 2:
            raise MapError(f"path/goal shapes differ: {self.path.shape} vs {self.goal.shape}")


@dataclass(frozen=True)
class ChannelMask:
    """Which modalities feed the fused map; masked-out channels are zero-filled."""

    rgb: bool = True
    occ: bool = True
    sem: bool = True

    @classmethod
    def from_names(cls, names) -> "ChannelMask":
        names = set(names)
        unknown = names - set(MODALITIES)
        if unknown:
            raise ValueError(f"unknown modalities {sorted(unknown)}")
        return cls(rgb="rgb" in names, occ="occ" in names, sem="sem" in names)

    def names(self) -> tuple[str, ...]:
        return tuple(m for m in MODALITIES if getattr(self, m))


@dataclass(frozen=True, eq=False)
class FusedMap:
    data: np.ndarray  # (H, W, C_in)
    mask: ChannelMask = field(default_factory=ChannelMask)

    @property
    def channels(self) -> int:
        return self.data.shape[-1]


def fuse_maps(rgb, occ, sem, embedding, mask: ChannelMask | None = None) -> FusedMap:
    """Concatenate ``[rgb / 255 | occ | embedding[sem]]`` per pixel.

    ``embedding`` is a ``(41, D_sem)`` table.
    """
    mask = mask or ChannelMask()
    rgb = np.asarray(rgb)
    occ = np.asarray(occ)
    sem = np.asarray(sem)
    embedding = np.asarray(embedding, dtype=np.float64)
    if embedding.ndim != 2 or embedding.shape[0] != NUM_CLASSES:
        raise MapError(f"embedding table must have {NUM_CLASSES} rows, got {embedding.shape}")
    h, w = occ.shape
    if rgb.shape != (h, w, 3) or sem.shape != (h, w):
        raise MapError(f"shape mismatch: rgb {rgb.shape}, occ {occ.shape}, sem {sem.shape}")
    parts = [
        rgb.astype(np.float64) / 255.0 if mask.rgb else np.zeros((h, w, 3)),
        occ.astype(np.float64)[..., None] if mask.occ else np.zeros((h, w, 1)),
        embedding[sem] if mask.sem else np.zeros((h, w, embedding.shape[1])),
    ]
    return FusedMap(np.concatenate(parts, axis=-1), mask)
