"""Path extraction from predicted path/goal probability maps.

Goal = argmax of the goal map; cost map = ``1 / (P_path + eps)`` on free cells
and ``C_obs`` on obstacles; A* over the 8-neighbourhood with the update
``g(n') = g(n) + C(n')``. The start cell is never charged and a diagonal step
costs the same as a straight one.

Two obstacle modes exist. ``HARD`` never enters ``occ == 0`` cells, so an
enclosed goal is unreachable and the snap-and-replan fallback applies.
``SOFT`` enters them at ``C_obs``.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numba
import numpy as np

from .gridmap import MapMeta, pixel_to_world

DEFAULT_EPS = 0.01
DEFAULT_C_OBS = 1000.0

NEIGHBORS = np.array(
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)], dtype=np.int64
)


class Mode(str, Enum):
    HARD = "hard"
    SOFT = "soft"


class PlannerError(RuntimeError):
    pass


class UnreachableError(PlannerError):
    pass


@dataclass(frozen=True)
class PlannerParams:
    eps: float = DEFAULT_EPS
    c_obs: float = DEFAULT_C_OBS
    mode: Mode = Mode.HARD
    # unscaled Euclidean heuristic; may overestimate
    literal_heuristic: bool = False


@dataclass(frozen=True, eq=False)
class CostMap:
    cost: np.ndarray  # float64 (H, W)
    passable: np.ndarray  # bool (H, W); HARD mode marks obstacles impassable
    eps: float
    c_obs: float
    mode: Mode


@dataclass(frozen=True, eq=False)
class PixelPath:
    cells: list[tuple[int, int]]
    cost: float
    expanded: int = 0
    snapped: bool = False

    def __len__(self):
        return len(self.cells)

    @property
    def start(self):
        return self.cells[0]

    @property
    def end(self):
        return self.cells[-1]


def localize_goal(goal_map) -> tuple[int, int]:
    goal_map = np.asarray(goal_map)
    if goal_map.size == 0:
        raise PlannerError("empty goal map")
    if np.isnan(goal_map).any():
        raise PlannerError("goal map contains NaN")
    # np.argmax returns the first maximum in row-major order
    r, c = np.unravel_index(int(np.argmax(goal_map)), goal_map.shape)
    return int(r), int(c)


def build_cost_map(path_map, occ, eps=DEFAULT_EPS, c_obs=DEFAULT_C_OBS, mode=Mode.HARD) -> CostMap:
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    path_map = np.asarray(path_map, dtype=np.float64)
    occ = np.asarray(occ)
    if path_map.shape != occ.shape:
        raise ValueError(f"path map {path_map.shape} and occupancy {occ.shape} differ")
    free = occ != 0
    cost = np.where(free, 1.0 / (path_map + eps), float(c_obs))
    passable = free if Mode(mode) is Mode.HARD else np.ones_like(free)
    return CostMap(cost=cost, passable=passable, eps=eps, c_obs=float(c_obs), mode=Mode(mode))


@numba.njit(cache=True)
def _astar_kernel(cost, passable, sr, sc, gr, gc, h_scale, neighbors):
    h, w = cost.shape
    n = h * w
    g = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.bool_)
    start = sr * w + sc
    goal = gr * w + gc
    g[start] = 0.0
    h0 = h_scale * math.sqrt(float((sr - gr) ** 2 + (sc - gc) ** 2))
    heap = [(h0, 0.0, np.int64(start))]
    expanded = 0
    while len(heap) > 0:
        f_cur, g_cur, node = heapq.heappop(heap)
        if closed[node]:
            continue
        if g_cur > g[node]:
            continue
        closed[node] = True
        expanded += 1
        if node == goal:
            break
        r = node // w
        c = node - r * w
        for k in range(8):
            nr = r + neighbors[k, 0]
            nc = c + neighbors[k, 1]
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            if not passable[nr, nc]:
                continue
            nxt = nr * w + nc
            if closed[nxt]:
                continue
            g_new = g_cur + cost[nr, nc]
            if g_new < g[nxt]:
                g[nxt] = g_new
                parent[nxt] = node
                hn = h_scale * math.sqrt(float((nr - gr) ** 2 + (nc - gc) ** 2))
                heapq.heappush(heap, (g_new + hn, g_new, np.int64(nxt)))
    return g[goal], parent, expanded


def heuristic_scale(cmap: CostMap, literal: bool = False) -> float:
    """Multiplier on Euclidean cell distance used as the A* heuristic.

    A step moves at most sqrt(2) cells and costs at least the cheapest
    enterable cell, so ``min_cost / sqrt(2)`` keeps the heuristic admissible
    and consistent.
    """
    if literal:
        return 1.0
    enterable = cmap.cost[cmap.passable]
    if enterable.size == 0:
        return 0.0
    return float(enterable.min()) / math.sqrt(2.0)


def _check_cell(cell, shape, name):
    r, c = int(cell[0]), int(cell[1])
    if not (0 <= r < shape[0] and 0 <= c < shape[1]):
        raise PlannerError(f"{name} {cell} outside {shape[0]}x{shape[1]} map")
    return r, c


def astar(cmap: CostMap, start, goal, literal_heuristic: bool = False) -> PixelPath:
    """Minimum accumulated-cost 8-connected path from ``start`` to ``goal``.

    Raises :class:`UnreachableError` when the goal cannot be entered.
    The start cell is always expandable, whatever its occupancy.
    """
    sr, sc = _check_cell(start, cmap.cost.shape, "start")
    gr, gc = _check_cell(goal, cmap.cost.shape, "goal")
    if (sr, sc) == (gr, gc):
        return PixelPath(cells=[(sr, sc)], cost=0.0, expanded=0)
    scale = heuristic_scale(cmap, literal_heuristic)
    total, parent, expanded = _astar_kernel(
        np.ascontiguousarray(cmap.cost, dtype=np.float64),
        np.ascontiguousarray(cmap.passable, dtype=np.bool_),
        sr, sc, gr, gc, scale, NEIGHBORS,
    )
    if not np.isfinite(total):
        raise UnreachableError(f"goal {(gr, gc)} unreachable from {(sr, sc)}")
    w = cmap.cost.shape[1]
    cells = []
    node = gr * w + gc
    while node != -1:
        cells.append((int(node // w), int(node % w)))
        node = parent[node]
    cells.reverse()
    return PixelPath(cells=cells, cost=float(total), expanded=int(expanded))


def reachable_mask(occ, start) -> np.ndarray:
    """Cells reachable from ``start`` through free cells (8-connected); start is always included."""
    occ = np.asarray(occ)
    return _reachable_kernel(np.ascontiguousarray(occ != 0), int(start[0]), int(start[1]), NEIGHBORS)


@numba.njit(cache=True)
def _reachable_kernel(free, sr, sc, neighbors):
    h, w = free.shape
    seen = np.zeros((h, w), dtype=np.bool_)
    stack = np.empty(h * w, dtype=np.int64)
    seen[sr, sc] = True
    stack[0] = sr * w + sc
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        r = node // w
        c = node - r * w
        for k in range(8):
            nr = r + neighbors[k, 0]
            nc = c + neighbors[k, 1]
            if 0 <= nr < h and 0 <= nc < w and free[nr, nc] and not seen[nr, nc]:
                seen[nr, nc] = True
                stack[top] = nr * w + nc
                top += 1
    return seen


def snap_to_reachable(goal, occ, start) -> tuple[int, int]:
    """Nearest (Euclidean) free cell reachable from ``start``; ties go row-major."""
    occ = np.asarray(occ)
    start = _check_cell(start, occ.shape, "start")
    goal = _check_cell(goal, occ.shape, "goal")
    mask = reachable_mask(occ, start)
    candidates = mask & (occ != 0)
    if not candidates.any():
        warnings.warn("start has no free reachable neighbourhood; snapping to start", RuntimeWarning)
        return start
    rows, cols = np.nonzero(candidates)  # row-major order
    d2 = (rows - goal[0]) ** 2 + (cols - goal[1]) ** 2
    i = int(np.argmin(d2))
    return int(rows[i]), int(cols[i])


def extract_path(path_map, goal_map, occ, start, params: PlannerParams | None = None) -> PixelPath:
    """Goal argmax, cost map, A*; on failure snap the target to a reachable free cell and replan."""
    params = params or PlannerParams()
    goal = localize_goal(goal_map)
    cmap = build_cost_map(path_map, occ, params.eps, params.c_obs, params.mode)
    try:
        return astar(cmap, start, goal, params.literal_heuristic)
    except UnreachableError:
        snapped = snap_to_reachable(goal, occ, start)
        path = astar(cmap, start, snapped, params.literal_heuristic)
        return PixelPath(path.cells, path.cost, path.expanded, snapped=True)


def path_to_waypoints(path, meta: MapMeta) -> list[tuple[float, float]]:
    cells = path.cells if isinstance(path, PixelPath) else path
    if len(cells) == 0:
        raise PlannerError("empty path")
    return [pixel_to_world(r, c, meta) for r, c in cells]


def path_cost(cmap: CostMap, cells: Sequence[tuple[int, int]]) -> float:
    """Accumulated cost of a cell sequence under the planner's g-rule."""
    return float(sum(cmap.cost[r, c] for r, c in cells[1:]))


@numba.njit(cache=True)
def _geodesic_kernel(free, sr, sc, gr, gc, neighbors):
    h, w = free.shape
    n = h * w
    dist = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    start = sr * w + sc
    goal = gr * w + gc
    dist[start] = 0.0
    heap = [(0.0, np.int64(start))]
    root2 = math.sqrt(2.0)
    while len(heap) > 0:
        d, node = heapq.heappop(heap)
        if done[node]:
            continue
        done[node] = True
        if node == goal:
            break
        r = node // w
        c = node - r * w
        for k in range(8):
            nr = r + neighbors[k, 0]
            nc = c + neighbors[k, 1]
            if nr < 0 or nr >= h or nc < 0 or nc >= w or not free[nr, nc]:
                continue
            nxt = nr * w + nc
            if done[nxt]:
                continue
            step = root2 if neighbors[k, 0] != 0 and neighbors[k, 1] != 0 else 1.0
            nd = d + step
            if nd < dist[nxt]:
                dist[nxt] = nd
                parent[nxt] = node
                heapq.heappush(heap, (nd, np.int64(nxt)))
    return dist, parent


def geodesic_path(occ, start, goal) -> list[tuple[int, int]]:
    """Shortest 8-connected free-space path with diagonal steps weighted sqrt(2).

    Raises :class:`UnreachableError` if ``goal`` is not in the start's free component.
    """
    occ = np.asarray(occ)
    sr, sc = _check_cell(start, occ.shape, "start")
    gr, gc = _check_cell(goal, occ.shape, "goal")
    free = np.ascontiguousarray(occ != 0)
    if not free[gr, gc]:
        raise UnreachableError(f"goal {(gr, gc)} is not free")
    if (sr, sc) == (gr, gc):
        return [(sr, sc)]
    dist, parent = _geodesic_kernel(free, sr, sc, gr, gc, NEIGHBORS)
    w = occ.shape[1]
    if not np.isfinite(dist[gr * w + gc]):
        raise UnreachableError(f"goal {(gr, gc)} unreachable from {(sr, sc)}")
    return _backtrack(parent, gr * w + gc, w)


def _backtrack(parent, node, w):
    cells = []
    while node != -1:
        cells.append((int(node // w), int(node % w)))
        node = parent[node]
    cells.reverse()
    return cells


def distance_field(free, start):
    """Octile geodesic distance (cells) from ``start`` over ``free``, plus a path lookup function."""
    free = np.ascontiguousarray(np.asarray(free, dtype=bool))
    sr, sc = _check_cell(start, free.shape, "start")
    dist, parent = _geodesic_kernel(free, sr, sc, -1, -1, NEIGHBORS)
    w = free.shape[1]

    def path_to(cell):
        return _backtrack(parent, int(cell[0]) * w + int(cell[1]), w)

    return dist.reshape(free.shape), path_to


def metric_length(cells, meters_per_pixel: float) -> float:
    """Polyline length in meters of a cell sequence."""
    if len(cells) < 2:
        return 0.0
    a = np.asarray(cells, dtype=np.float64)
    return float(np.sum(np.hypot(np.diff(a[:, 0]), np.diff(a[:, 1])))) * meters_per_pixel
