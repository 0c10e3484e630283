"""Frontier-based exploration pass that collects posed RGB-D frames.

The agent keeps a per-cell label histogram of everything it has seen. Known
free cells are those whose majority label is floor; frontier cells are known
free cells 4-adjacent to a cell with no observations. Each round the agent
walks the known-free shortest path to the nearest frontier (geodesic
distance in cells, ties to the lowest ``(r, c)``), taking a forward-facing
frame every few cells and a four-heading sweep on arrival.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..gridmap import FLOOR, NUM_CLASSES, cell_center
from ..planner import distance_field
from .projection import label_counts
from .scene import Scene, flood_fill
from .sensor import CameraFrame, Pose, SensorConfig, backproject, look_pose, render_frame


class PlacementError(ValueError):
    pass


@dataclass(frozen=True)
class ExploreConfig:
    sensor: SensorConfig = field(default_factory=SensorConfig)
    sweep_headings: int = 4
    frame_every: int = 5  # cells between frames while travelling
    window: int = 10  # targets in the coverage-gain window
    min_gain: float = 0.005  # coverage gain over the window below which exploration stops
    max_targets: int = 400
    footprint: float = 0.8  # meters around the agent assumed traversable when unobserved


@dataclass(eq=False)
class ExplorationResult:
    poses: list[Pose]
    frames: list[CameraFrame]
    coverage: list[float]
    counts: np.ndarray  # (H, W, 41) accumulated label histogram
    start_frames: int
    targets: list[tuple[int, int]]

    @property
    def final_coverage(self) -> float:
        return self.coverage[-1] if self.coverage else 0.0


def reachable_floor(scene: Scene, start_cell) -> np.ndarray:
    return flood_fill(scene.floor, start_cell)


def frontier_cells(counts: np.ndarray) -> np.ndarray:
    observed = counts.sum(axis=-1) > 0
    free = observed & (np.argmax(counts, axis=-1) == FLOOR)
    unknown = ~observed
    near_unknown = np.zeros_like(free)
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[:, 1:] |= unknown[:, :-1]
    near_unknown[:, :-1] |= unknown[:, 1:]
    return free & near_unknown


def frontier_explore(scene: Scene, start_cell, config: ExploreConfig | None = None, prior_counts=None) -> ExplorationResult:
    config = config or ExploreConfig()
    meta = scene.meta
    r, c = int(start_cell[0]), int(start_cell[1])
    if not (meta.contains_cell(r, c) and scene.floor[r, c]):
        raise PlacementError(f"start cell {(r, c)} is not free floor")
    sensor = config.sensor
    pitch = math.radians(sensor.pitch_deg)
    truth = reachable_floor(scene, (r, c))
    truth_total = int(truth.sum())
    counts = (
        np.zeros(meta.shape + (NUM_CLASSES,), dtype=np.int64)
        if prior_counts is None else np.array(prior_counts, dtype=np.int64)
    )
    poses: list[Pose] = []
    frames: list[CameraFrame] = []
    coverage: list[float] = []
    targets: list[tuple[int, int]] = []

    def capture(cell, yaw):
        x, z = cell_center(cell[0], cell[1], meta)
        pose = look_pose(x, z, yaw, sensor.camera_height, pitch)
        frame = render_frame(scene, pose, sensor)
        nonlocal counts
        counts += label_counts(backproject(frame), meta)
        poses.append(pose)
        frames.append(frame)

    def sweep(cell):
        for k in range(config.sweep_headings):
            capture(cell, 2.0 * math.pi * k / config.sweep_headings)

    def measure():
        observed_free = (counts.sum(axis=-1) > 0) & (np.argmax(counts, axis=-1) == FLOOR)
        coverage.append(float((observed_free & truth).sum()) / truth_total)

    agent = (r, c)
    if prior_counts is None or frontier_cells(counts).any():
        sweep(agent)
    measure()
    start_frames = len(frames)
    blacklist = np.zeros(meta.shape, dtype=bool)
    ii, jj = np.indices(meta.shape)
    foot = config.footprint / meta.meters_per_pixel

    while len(targets) < config.max_targets:
        frontier = frontier_cells(counts) & ~blacklist
        if not frontier.any():
            break
        observed = counts.sum(axis=-1) > 0
        known_free = observed & (np.argmax(counts, axis=-1) == FLOOR)
        # the sensor cannot see the floor under and right next to the agent
        traversable = known_free | (~observed & (np.hypot(ii - agent[0], jj - agent[1]) <= foot))
        traversable[agent] = True
        dist, path_to = distance_field(traversable, agent)
        cand = frontier & np.isfinite(dist)
        if not cand.any():
            break
        rows, cols = np.nonzero(cand)
        d = dist[rows, cols]
        order = np.lexsort((cols, rows, d))
        target = (int(rows[order[0]]), int(cols[order[0]]))
        route = path_to(target)
        for i in range(config.frame_every, len(route) - 1, config.frame_every):
            prev, cur = route[i - 1], route[i]
            capture(cur, math.atan2(cur[0] - prev[0], cur[1] - prev[1]))
        agent = target
        sweep(agent)
        targets.append(target)
        measure()
        if frontier_cells(counts)[target]:
            blacklist[target] = True
        if len(targets) >= config.window and coverage[-1] - coverage[-1 - config.window] < config.min_gain:
            break

    return ExplorationResult(poses, frames, coverage, counts, start_frames, targets)
