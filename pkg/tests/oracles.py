"""Independent reference implementations used by the tests."""

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def entered_cell_graph(cost, passable):
    """Directed 8-neighbour graph where moving into a cell costs that cell."""
    h, w = cost.shape
    idx = np.arange(h * w).reshape(h, w)
    rows, cols, vals = [], [], []
    for dr, dc in OFFSETS:
        src = idx[max(0, -dr): h - max(0, dr), max(0, -dc): w - max(0, dc)]
        dst = idx[max(0, dr): h - max(0, -dr), max(0, dc): w - max(0, -dc)]
        ok = passable.ravel()[dst]
        rows.append(src[ok])
        cols.append(dst[ok])
        vals.append(cost.ravel()[dst[ok]])
    rows, cols, vals = (np.concatenate(a) for a in (rows, cols, vals))
    return coo_matrix((vals, (rows, cols)), shape=(h * w, h * w)).tocsr()


def dijkstra_cost(cost, passable, start, goal):
    w = cost.shape[1]
    graph = entered_cell_graph(cost, passable)
    dist = dijkstra(graph, directed=True, indices=start[0] * w + start[1])
    return dist[goal[0] * w + goal[1]]


def octile_distances(free, start):
    h, w = free.shape
    rows, cols, vals = [], [], []
    for r in range(h):
        for c in range(w):
            if not free[r, c]:
                continue
            for dr, dc in OFFSETS:
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and free[nr, nc]:
                    rows.append(r * w + c)
                    cols.append(nr * w + nc)
                    vals.append(np.sqrt(2.0) if dr and dc else 1.0)
    graph = coo_matrix((vals, (rows, cols)), shape=(h * w, h * w)).tocsr()
    return dijkstra(graph, directed=True, indices=start[0] * w + start[1]).reshape(h, w)


def bfs_component(free, start):
    h, w = free.shape
    seen = np.zeros_like(free, dtype=bool)
    seen[start] = True
    todo = [start]
    while todo:
        r, c = todo.pop()
        for dr, dc in OFFSETS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and free[nr, nc] and not seen[nr, nc]:
                seen[nr, nc] = True
                todo.append((nr, nc))
    return seen


def random_instance(rng, size=32, obstacle_rate=0.25):
    """Random probability map and occupancy with a free start and a free goal in its component."""
    while True:
        occ = (rng.random((size, size)) > obstacle_rate).astype(np.uint8)
        free = np.argwhere(occ == 1)
        start = tuple(int(v) for v in free[rng.integers(len(free))])
        comp = bfs_component(occ == 1, start)
        cand = np.argwhere(comp)
        if len(cand) < 2:
            continue
        goal = tuple(int(v) for v in cand[rng.integers(len(cand))])
        if goal != start:
            return rng.random((size, size)), occ, start, goal
