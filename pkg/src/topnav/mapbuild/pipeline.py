"""Scene -> exploration -> point cloud -> finalized MapBundle."""

from __future__ import annotations

import numpy as np

from ..gridmap import MapBundle
from .explore import ExplorationResult, ExploreConfig, frontier_explore
from .projection import finalize_maps, majority_label, project_rgb
from .scene import Scene
from .sensor import LabeledPointCloud, backproject


def default_start(scene: Scene) -> tuple[int, int]:
    """Deterministic exploration start: the floor cell nearest the first room's center."""
    cr, cc = scene.rooms[0].rect.center()
    cells = np.argwhere(scene.floor)
    d2 = (cells[:, 0] + 0.5 - cr) ** 2 + (cells[:, 1] + 0.5 - cc) ** 2
    r, c = cells[int(np.argmin(d2))]
    return int(r), int(c)


def build_maps(scene: Scene, size: int = 64, config: ExploreConfig | None = None,
               band: tuple[float, float] | None = None) -> tuple[MapBundle, ExplorationResult]:
    result = frontier_explore(scene, default_start(scene), config)
    cloud = LabeledPointCloud.concat(backproject(f) for f in result.frames)
    band = band or scene.height_band()
    meta = scene.meta
    rgb = project_rgb(cloud, meta, band)
    sem = majority_label(result.counts)
    return finalize_maps(rgb, sem, meta, size), result
