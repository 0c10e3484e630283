"""Procedural single-floor indoor scenes.

A scene is a rectangular extent rasterized at ``resolution`` meters per
cell. Every cell is a column: floor (height 0), wall (height
``wall_height``) or a furnishing box of some class and height. Rooms sit on
a coarse macro grid and are joined by L-shaped corridors along a random
spanning tree, so the floor is always one connected component.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from ..gridmap import FLOOR, SEMANTIC_CLASSES, WALL, MapMeta

ROOM_NAMES = (
    "bedroom", "kitchen", "bathroom", "lounge", "office", "study", "closet",
    "laundry", "gym", "nursery", "library", "pantry",
)

OBJECT_CLASSES = (
    3, 5, 7, 10, 11, 13, 14, 15, 18, 19, 22, 23, 25, 26, 27, 31, 33, 34, 36, 37, 38,
)

# Base RGB per object class; a per-instance jitter is added on top.
_CLASS_BASE_COLORS = {
    cid: tuple(int(v) for v in np.random.default_rng(1000 + cid).integers(40, 230, size=3))
    for cid in OBJECT_CLASSES
}
_WALL_COLOR = (150, 150, 155)


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class SceneConfig:
    extent: float = 24.0  # side length, meters
    resolution: float = 0.2  # meters per cell
    macro_grid: int = 3
    rooms: int = 5
    room_size: tuple[float, float] = (3.6, 6.4)
    corridor_width: tuple[float, float] = (1.2, 1.6)
    objects: int = 10
    object_size: tuple[float, float] = (0.8, 1.4)
    object_height: tuple[float, float] = (0.4, 1.1)
    wall_height: float = 2.5
    floor_height: float = 0.0

    @property
    def cells(self) -> int:
        return int(round(self.extent / self.resolution))


@dataclass(frozen=True)
class Rect:
    r0: int
    c0: int
    r1: int  # exclusive
    c1: int  # exclusive

    @property
    def area(self) -> int:
        return max(0, self.r1 - self.r0) * max(0, self.c1 - self.c0)

    def center(self) -> tuple[float, float]:
        return ((self.r0 + self.r1) / 2.0, (self.c0 + self.c1) / 2.0)

    def contains(self, r: float, c: float) -> bool:
        return self.r0 <= r < self.r1 and self.c0 <= c < self.c1


@dataclass(frozen=True)
class SceneObject:
    rect: Rect
    class_id: int
    height: float
    color: tuple[int, int, int]

    @property
    def name(self) -> str:
        return SEMANTIC_CLASSES[self.class_id]


@dataclass(frozen=True)
class Room:
    rect: Rect
    name: str
    floor_color: tuple[int, int, int]


@dataclass(eq=False)
class Scene:
    seed: int
    config: SceneConfig
    rooms: list[Room]
    corridors: list[Rect]
    objects: list[SceneObject]
    labels: np.ndarray = field(repr=False)  # (N, N) uint8 class id per column
    heights: np.ndarray = field(repr=False)  # (N, N) float column top, meters
    colors: np.ndarray = field(repr=False)  # (N, N, 3) uint8

    @property
    def meta(self) -> MapMeta:
        n = self.config.cells
        return MapMeta(self.config.resolution, 0.0, 0.0, n, n)

    @property
    def floor(self) -> np.ndarray:
        return self.labels == FLOOR

    @property
    def h_floor(self) -> float:
        return self.config.floor_height

    def height_band(self, below: float = 0.2, above: float = 1.5) -> tuple[float, float]:
        return (self.h_floor - below, self.h_floor + above)

    def room_at(self, r: float, c: float) -> Room | None:
        for room in self.rooms:
            if room.rect.contains(r, c):
                return room
        return None

    def object_by_class(self, class_id: int) -> SceneObject:
        for obj in self.objects:
            if obj.class_id == class_id:
                return obj
        raise KeyError(class_id)

    def same_as(self, other: "Scene") -> bool:
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config": asdict(self.config),
            "rooms": [{"rect": asdict(r.rect), "name": r.name, "floor_color": list(r.floor_color)} for r in self.rooms],
            "corridors": [asdict(c) for c in self.corridors],
            "objects": [
                {"rect": asdict(o.rect), "class_id": o.class_id, "height": o.height, "color": list(o.color)}
                for o in self.objects
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        cfg = d["config"]
        config = SceneConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg.items()})
        rooms = [Room(Rect(**r["rect"]), r["name"], tuple(r["floor_color"])) for r in d["rooms"]]
        corridors = [Rect(**c) for c in d["corridors"]]
        objects = [SceneObject(Rect(**o["rect"]), o["class_id"], o["height"], tuple(o["color"])) for o in d["objects"]]
        return _rasterize(d["seed"], config, rooms, corridors, objects)

    @classmethod
    def from_json(cls, text: str) -> "Scene":
        return cls.from_dict(json.loads(text))


def flood_fill(mask: np.ndarray, seed_cell) -> np.ndarray:
    """4-connected component of ``mask`` containing ``seed_cell``."""
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    r, c = seed_cell
    if not mask[r, c]:
        return out
    out[r, c] = True
    queue = deque([(r, c)])
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not out[nr, nc]:
                out[nr, nc] = True
                queue.append((nr, nc))
    return out


def _is_connected(floor: np.ndarray) -> bool:
    cells = np.argwhere(floor)
    if len(cells) == 0:
        return False
    return int(flood_fill(floor, tuple(cells[0])).sum()) == len(cells)


def _rasterize(seed, config, rooms, corridors, objects) -> Scene:
    n = config.cells
    labels = np.full((n, n), WALL, dtype=np.uint8)
    heights = np.full((n, n), config.wall_height, dtype=np.float64)
    colors = np.empty((n, n, 3), dtype=np.uint8)
    colors[:] = _WALL_COLOR
    texture = np.random.default_rng(seed + 7919).integers(-12, 13, size=(n, n, 1))
    corridor_color = np.array((185, 175, 160))
    for rect in corridors:
        sl = np.s_[rect.r0:rect.r1, rect.c0:rect.c1]
        labels[sl] = FLOOR
        heights[sl] = 0.0
        colors[sl] = corridor_color
    for room in rooms:
        sl = np.s_[room.rect.r0:room.rect.r1, room.rect.c0:room.rect.c1]
        labels[sl] = FLOOR
        heights[sl] = 0.0
        colors[sl] = room.floor_color
    for obj in objects:
        sl = np.s_[obj.rect.r0:obj.rect.r1, obj.rect.c0:obj.rect.c1]
        labels[sl] = obj.class_id
        heights[sl] = obj.height
        colors[sl] = obj.color
    colors = np.clip(colors.astype(np.int64) + texture, 0, 255).astype(np.uint8)
    heights = heights + config.floor_height
    return Scene(seed, config, list(rooms), list(corridors), list(objects), labels, heights, colors)


def _cells(meters: float, res: float) -> int:
    return max(1, int(round(meters / res)))


def generate_scene(seed: int, config: SceneConfig | None = None) -> Scene:
    config = config or SceneConfig()
    rng = np.random.default_rng(seed)
    n = config.cells
    g = config.macro_grid
    res = config.resolution
    if config.rooms < 1 or config.rooms > g * g:
        raise SceneError(f"rooms must be in [1, {g * g}]")
    macro = n // g
    lo, hi = (_cells(v, res) for v in config.room_size)
    hi = min(hi, macro - 2)
    if hi < 1 or lo > hi:
        raise SceneError("room size range leaves no floor area")

    # grow a connected set of macro cells; remember each cell's parent
    first = (int(rng.integers(g)), int(rng.integers(g)))
    chosen = [first]
    parents = {first: None}
    while len(chosen) < config.rooms:
        frontier = sorted({
            (r + dr, c + dc)
            for r, c in chosen
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1))
            if 0 <= r + dr < g and 0 <= c + dc < g and (r + dr, c + dc) not in parents
        })
        cell = frontier[int(rng.integers(len(frontier)))]
        neighbours = sorted(p for p in chosen if abs(p[0] - cell[0]) + abs(p[1] - cell[1]) == 1)
        parents[cell] = neighbours[int(rng.integers(len(neighbours)))]
        chosen.append(cell)

    names = list(rng.permutation(ROOM_NAMES))
    rooms = []
    room_of = {}
    for i, (mr, mc) in enumerate(chosen):
        hh = int(rng.integers(lo, hi + 1))
        ww = int(rng.integers(lo, hi + 1))
        r0 = mr * macro + 1 + int(rng.integers(0, macro - 2 - hh + 1))
        c0 = mc * macro + 1 + int(rng.integers(0, macro - 2 - ww + 1))
        color = tuple(int(v) for v in rng.integers(60, 220, size=3))
        room = Room(Rect(r0, c0, r0 + hh, c0 + ww), str(names[i % len(names)]), color)
        rooms.append(room)
        room_of[(mr, mc)] = room

    corridors = []
    cw_lo, cw_hi = (_cells(v, res) for v in config.corridor_width)
    for cell in chosen[1:]:
        a = room_of[cell].rect
        b = room_of[parents[cell]].rect
        width = int(rng.integers(cw_lo, cw_hi + 1))
        ar, ac = (int(v) for v in a.center())
        br, bc = (int(v) for v in b.center())
        half = width // 2
        if rng.random() < 0.5:
            legs = [Rect(ar - half, min(ac, bc) - half, ar - half + width, max(ac, bc) - half + width),
                    Rect(min(ar, br) - half, bc - half, max(ar, br) - half + width, bc - half + width)]
        else:
            legs = [Rect(min(ar, br) - half, ac - half, max(ar, br) - half + width, ac - half + width),
                    Rect(br - half, min(ac, bc) - half, br - half + width, max(ac, bc) - half + width)]
        corridors.extend(legs)

    base = _rasterize(seed, config, rooms, corridors, [])
    if not base.floor.any():
        raise SceneError("scene has no floor area")

    objects = []
    classes = list(rng.permutation(OBJECT_CLASSES))
    olo, ohi = (_cells(v, res) for v in config.object_size)
    attempts = 0
    floor = base.floor.copy()
    corridor_mask = np.zeros_like(floor)
    for rect in corridors:
        corridor_mask[rect.r0:rect.r1, rect.c0:rect.c1] = True
    while len(objects) < config.objects and attempts < 50 * max(1, config.objects):
        attempts += 1
        room = rooms[int(rng.integers(len(rooms)))].rect
        oh = int(rng.integers(olo, ohi + 1))
        ow = int(rng.integers(olo, ohi + 1))
        if oh >= room.r1 - room.r0 - 2 or ow >= room.c1 - room.c0 - 2:
            continue
        side = int(rng.integers(4))
        if side == 0:
            r0, c0 = room.r0, int(rng.integers(room.c0, room.c1 - ow + 1))
        elif side == 1:
            r0, c0 = room.r1 - oh, int(rng.integers(room.c0, room.c1 - ow + 1))
        elif side == 2:
            r0, c0 = int(rng.integers(room.r0, room.r1 - oh + 1)), room.c0
        else:
            r0, c0 = int(rng.integers(room.r0, room.r1 - oh + 1)), room.c1 - ow
        rect = Rect(r0, c0, r0 + oh, c0 + ow)
        sl = np.s_[rect.r0:rect.r1, rect.c0:rect.c1]
        # keep doorways clear and a one-cell margin from other furniture
        pad = np.s_[max(rect.r0 - 1, 0):rect.r1 + 1, max(rect.c0 - 1, 0):rect.c1 + 1]
        if corridor_mask[pad].any() or (base.floor[pad] & ~floor[pad]).any():
            continue
        trial = floor.copy()
        trial[sl] = False
        if not _is_connected(trial):
            continue
        floor = trial
        height = float(rng.uniform(*config.object_height))
        cid = int(classes[len(objects) % len(classes)])
        base_color = np.array(_CLASS_BASE_COLORS[cid])
        color = tuple(int(v) for v in np.clip(base_color + rng.integers(-15, 16, size=3), 0, 255))
        objects.append(SceneObject(rect, cid, height, color))

    scene = _rasterize(seed, config, rooms, corridors, objects)
    if not _is_connected(scene.floor):
        raise SceneError("generated floor is disconnected")
    return scene
