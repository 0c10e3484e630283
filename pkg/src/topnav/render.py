"""Static overlays of predicted and ground-truth routes on the RGB map."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .gridmap import MapBundle, MapError
from .mapio import write_pgm, write_ppm

PRED_COLOR = (255, 0, 0)
GT_COLOR = (0, 255, 0)
GOAL_GT_COLOR = (255, 255, 0)
GOAL_RADIUS = 1.5


class RenderError(MapError):
    pass


def _disk(img, center, radius, color):
    h, w = img.shape[:2]
    rr, cc = np.indices((h, w))
    img[(rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius * radius] = color


def _check(cells, shape, what):
    for r, c in cells:
        if not (0 <= r < shape[0] and 0 <= c < shape[1]):
            raise RenderError(f"{what} cell {(r, c)} outside {shape[0]}x{shape[1]} map")


def render_overlay(bundle: MapBundle, pred_path=(), gt_path=(), pred_goal=None, gt_goal=None) -> np.ndarray:
    """Ground truth drawn first, prediction on top; goals as disks over both."""
    img = bundle.rgb.copy()
    shape = bundle.meta.shape
    pred_path, gt_path = list(pred_path), list(gt_path)
    _check(gt_path, shape, "ground-truth")
    _check(pred_path, shape, "predicted")
    _check([g for g in (pred_goal, gt_goal) if g is not None], shape, "goal")
    for r, c in gt_path:
        img[r, c] = GT_COLOR
    for r, c in pred_path:
        img[r, c] = PRED_COLOR
    if gt_goal is not None:
        _disk(img, gt_goal, GOAL_RADIUS, GOAL_GT_COLOR)
    if pred_goal is not None:
        _disk(img, pred_goal, GOAL_RADIUS, PRED_COLOR)
    return img


def probability_image(p: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(p, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_overlay(path, image: np.ndarray, path_map=None, goal_map=None) -> list[Path]:
    """Write the overlay PPM and, when given, ``*_path.pgm`` / ``*_goal.pgm`` side images."""
    path = Path(path)
    write_ppm(path, image)
    written = [path]
    for suffix, pmap in (("path", path_map), ("goal", goal_map)):
        if pmap is not None:
            side = path.with_name(f"{path.stem}_{suffix}.pgm")
            write_pgm(side, probability_image(pmap))
            written.append(side)
    return written
