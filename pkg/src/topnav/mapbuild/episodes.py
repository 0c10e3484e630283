"""Navigation episodes: start pose, templated instruction and ground-truth route."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..gridmap import SEMANTIC_CLASSES, MapBundle, cell_center, world_to_pixel
from ..planner import distance_field, metric_length, reachable_mask
from . import vocab
from .scene import Scene


class EpisodeError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeConfig:
    min_distance: float = 6.0  # meters of geodesic route
    max_tries: int = 64
    min_segment: int = 3  # waypoints a room visit must span to be mentioned


@dataclass(eq=False)
class Episode:
    id: str
    tokens: list[str]
    p0: tuple[float, float]  # world (X, Z), meters
    r0: tuple[float, float, float, float]  # unit quaternion (w, x, y, z), yaw about +Y
    waypoints: list[tuple[int, int]]  # pixel (r, c), 8-adjacent
    scene: str
    goal_class: int
    geodesic: float = 0.0  # meters
    extra: dict = field(default_factory=dict)

    @property
    def start(self) -> tuple[int, int]:
        return self.waypoints[0]

    @property
    def goal(self) -> tuple[int, int]:
        return self.waypoints[-1]

    def token_ids(self) -> list[int]:
        return vocab.encode(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "scene": self.scene,
            "instruction": self.text,
            "tokens": list(self.tokens),
            "p0": [float(v) for v in self.p0],
            "r0": [float(v) for v in self.r0],
            "waypoints": [[int(r), int(c)] for r, c in self.waypoints],
            "goal_class": int(self.goal_class),
            "geodesic": float(self.geodesic),
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Episode":
        try:
            return cls(
                id=str(d["id"]),
                tokens=[str(t) for t in d["tokens"]],
                p0=(float(d["p0"][0]), float(d["p0"][1])),
                r0=tuple(float(v) for v in d["r0"]),
                waypoints=[(int(r), int(c)) for r, c in d["waypoints"]],
                scene=str(d["scene"]),
                goal_class=int(d["goal_class"]),
                geodesic=float(d.get("geodesic", 0.0)),
                extra=dict(d.get("extra", {})),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise EpisodeError(f"malformed episode record: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Episode":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise EpisodeError(f"{path}: {exc}") from exc


def yaw_quaternion(yaw: float) -> tuple[float, float, float, float]:
    return (math.cos(yaw / 2.0), 0.0, math.sin(yaw / 2.0), 0.0)


def heading_of(waypoints) -> float:
    """Yaw (radians from +X towards +Z) of the first path segment; 0 for a single cell."""
    if len(waypoints) < 2:
        return 0.0
    (r0, c0), (r1, c1) = waypoints[0], waypoints[1]
    return math.atan2(r1 - r0, c1 - c0)


def check_episode(ep: Episode, bundle: MapBundle) -> None:
    """Raise :class:`EpisodeError` if the episode violates its structural invariants."""
    occ = bundle.occ
    for r, c in ep.waypoints:
        if not bundle.meta.contains_cell(r, c) or occ[r, c] != 1:
            raise EpisodeError(f"waypoint {(r, c)} is not a free cell")
    for (a, b), (c, d) in zip(ep.waypoints, ep.waypoints[1:]):
        if max(abs(a - c), abs(b - d)) != 1:
            raise EpisodeError(f"waypoints {(a, b)} and {(c, d)} are not 8-adjacent")
    if abs(math.sqrt(sum(v * v for v in ep.r0)) - 1.0) > 1e-9:
        raise EpisodeError("r0 is not a unit quaternion")
    if world_to_pixel(ep.p0[0], ep.p0[1], bundle.meta) != tuple(ep.waypoints[0]):
        raise EpisodeError("p0 does not lie in the first waypoint cell")


def _largest_component(occ: np.ndarray) -> np.ndarray:
    free = occ != 0
    best = np.zeros_like(free)
    left = free.copy()
    while left.any():
        r, c = np.argwhere(left)[0]
        comp = reachable_mask(occ, (r, c))
        left &= ~comp
        if comp.sum() > best.sum():
            best = comp
    return best


def _goal_cell(bundle: MapBundle, class_id: int, region: np.ndarray):
    """Free cell of ``region`` nearest to any pixel labelled ``class_id``; None when absent."""
    obj = np.argwhere(bundle.sem == class_id)
    cand = np.argwhere(region)
    if obj.size == 0 or cand.size == 0:
        return None
    d2 = ((cand[:, None, :] - obj[None, :, :]) ** 2).sum(-1).min(axis=1)
    i = int(np.argmin(d2))  # row-major on ties
    if d2[i] > 2:  # the free cell must touch the object
        return None
    return int(cand[i, 0]), int(cand[i, 1])


def route_rooms(scene: Scene, bundle: MapBundle, waypoints, min_segment: int = 3) -> list[str]:
    """Room names along the route (``corridor`` outside rooms), with short visits dropped."""
    res = scene.config.resolution
    names = []
    for r, c in waypoints:
        x, z = cell_center(r, c, bundle.meta)
        room = scene.room_at(z / res, x / res)
        names.append(room.name if room is not None else "corridor")
    runs: list[list] = []
    for n in names:
        if runs and runs[-1][0] == n:
            runs[-1][1] += 1
        else:
            runs.append([n, 1])
    first, last = runs[0][0], runs[-1][0]
    kept = [n for n, k in runs[1:-1] if k >= min_segment]
    seq = [first] + kept + ([last] if len(runs) > 1 else [])
    out = []
    for n in seq:
        if not out or out[-1] != n:
            out.append(n)
    return out


def compose_instruction(rooms: list[str], goal_class: int, rng: np.random.Generator) -> list[str]:
    goal = SEMANTIC_CLASSES[goal_class]
    pick = lambda options: options[int(rng.integers(len(options)))].split()
    words: list[str] = []
    if len(rooms) == 1:
        where = "corridor" if rooms[0] == "corridor" else rooms[0]
        words += pick(["find the {} in the {} and stop".format(goal, where),
                       "walk to the {} inside the {} and stop".format(goal, where)])
        return words + ["."]
    head = rooms[0]
    if head == "corridor":
        words += pick(["walk down the corridor", "follow the hallway"])
    else:
        words += pick([f"exit the {head}", f"leave the {head}", f"walk out of the {head}"])
    for name in rooms[1:-1]:
        words.append(",")
        if name == "corridor":
            words += pick(["go down the corridor", "follow the hallway", "continue along the corridor"])
        else:
            words += pick([f"go through the {name}", f"pass through the {name}", f"cross the {name}"])
    tail = rooms[-1]
    words.append(",")
    if tail == "corridor":
        words += pick(["head into the corridor", "go down the hallway"])
    else:
        words += pick([f"enter the {tail}", f"walk into the {tail}", f"go into the {tail}"])
    words += ["and"] + pick([f"stop at the {goal}", f"stop next to the {goal}", f"wait by the {goal}"])
    words.append(".")
    missing = [w for w in words if vocab.token_id(w) == vocab.UNK]
    assert not missing, missing
    return words


def generate_episode(scene: Scene, bundle: MapBundle, seed: int, config: EpisodeConfig | None = None,
                     episode_id: str | None = None, scene_id: str | None = None,
                     exclude: set | None = None) -> Episode:
    """Random start, a uniquely-classed goal object far enough away, and the geodesic route to it."""
    config = config or EpisodeConfig()
    rng = np.random.default_rng(seed)
    s = bundle.meta.meters_per_pixel
    region = _largest_component(bundle.occ)
    starts = np.argwhere(region)
    if len(starts) < 2:
        raise EpisodeError("map has fewer than two connected free cells")
    classes = sorted({o.class_id for o in scene.objects})
    goals = {k: g for k in classes if (g := _goal_cell(bundle, k, region)) is not None}
    if not goals:
        raise EpisodeError("no goal object is visible in the map")
    exclude = exclude or set()
    for _ in range(config.max_tries):
        start = tuple(int(v) for v in starts[int(rng.integers(len(starts)))])
        dist, path_to = distance_field(region, start)
        options = [k for k, g in goals.items() if dist[g] * s >= config.min_distance and (start, g) not in exclude]
        if not options:
            continue
        goal_class = options[int(rng.integers(len(options)))]
        waypoints = path_to(goals[goal_class])
        rooms = route_rooms(scene, bundle, waypoints, config.min_segment)
        tokens = compose_instruction(rooms, goal_class, rng)
        p0 = cell_center(start[0], start[1], bundle.meta)
        ep = Episode(
            id=episode_id or f"ep{seed}",
            tokens=tokens,
            p0=p0,
            r0=yaw_quaternion(heading_of(waypoints)),
            waypoints=waypoints,
            scene=scene_id or f"scene{scene.seed}",
            goal_class=goal_class,
            geodesic=metric_length(waypoints, s),
        )
        return ep
    raise EpisodeError(f"no goal at geodesic distance >= {config.min_distance} m after {config.max_tries} tries")
