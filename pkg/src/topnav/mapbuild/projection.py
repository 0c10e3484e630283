"""Orthographic top-down projection of labeled point clouds onto a grid."""

from __future__ import annotations

import numpy as np
from PIL import Image

from ..gridmap import FLOOR, NUM_CLASSES, VOID, MapBundle, MapError, MapMeta, world_to_pixel_array
from .sensor import LabeledPointCloud


def _cell_index(points: LabeledPointCloud, meta: MapMeta):
    rc = world_to_pixel_array(points.xyz[:, [0, 2]], meta, snap=False)
    inside = (rc[:, 0] >= 0) & (rc[:, 0] < meta.height) & (rc[:, 1] >= 0) & (rc[:, 1] < meta.width)
    return rc[:, 0] * meta.width + rc[:, 1], inside


def project_rgb(points: LabeledPointCloud, meta: MapMeta, band: tuple[float, float]) -> np.ndarray:
    """Mean color of in-band points per cell; empty cells are black."""
    flat, inside = _cell_index(points, meta)
    y = points.xyz[:, 1]
    keep = inside & (y >= band[0]) & (y <= band[1])
    n = meta.height * meta.width
    counts = np.bincount(flat[keep], minlength=n).astype(np.float64)
    out = np.zeros((n, 3), dtype=np.float64)
    for ch in range(3):
        out[:, ch] = np.bincount(flat[keep], weights=points.color[keep, ch].astype(np.float64), minlength=n)
    filled = counts > 0
    out[filled] /= counts[filled, None]
    return np.rint(out).astype(np.uint8).reshape(meta.height, meta.width, 3)


def label_counts(points: LabeledPointCloud, meta: MapMeta) -> np.ndarray:
    """Per-cell histogram of point labels, shape ``(H, W, 41)``."""
    flat, inside = _cell_index(points, meta)
    n = meta.height * meta.width
    idx = flat[inside] * NUM_CLASSES + points.label[inside].astype(np.int64)
    counts = np.bincount(idx, minlength=n * NUM_CLASSES)
    return counts.reshape(meta.height, meta.width, NUM_CLASSES)


def majority_label(counts: np.ndarray) -> np.ndarray:
    # argmax picks the lowest class id among ties; empty cells fall to void (0)
    return np.argmax(counts, axis=-1).astype(np.uint8)


def project_semantic(points: LabeledPointCloud, meta: MapMeta) -> np.ndarray:
    return majority_label(label_counts(points, meta))


def derive_occupancy(sem: np.ndarray) -> np.ndarray:
    return (np.asarray(sem) == FLOOR).astype(np.uint8)


def _nearest_resize(a: np.ndarray, size: int) -> np.ndarray:
    src = a.shape[0]
    idx = np.minimum(((np.arange(size) + 0.5) * src / size).astype(np.int64), src - 1)
    return a[idx][:, idx]


def finalize_maps(rgb: np.ndarray, sem: np.ndarray, meta: MapMeta, size: int = 64) -> MapBundle:
    """Crop to the non-void bounding box, pad bottom/right to a square with void, resize to ``size``.

    Semantic and occupancy use nearest-neighbour sampling; RGB uses an area mean.
    """
    sem = np.asarray(sem, dtype=np.uint8)
    rows = np.nonzero((sem != VOID).any(axis=1))[0]
    cols = np.nonzero((sem != VOID).any(axis=0))[0]
    if rows.size == 0:
        raise MapError("map is entirely void")
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
    side = max(r1 - r0, c1 - c0)
    sem_sq = np.zeros((side, side), dtype=np.uint8)
    rgb_sq = np.zeros((side, side, 3), dtype=np.uint8)
    sem_sq[: r1 - r0, : c1 - c0] = sem[r0:r1, c0:c1]
    rgb_sq[: r1 - r0, : c1 - c0] = rgb[r0:r1, c0:c1]
    s = meta.meters_per_pixel
    if side == size:
        sem_out, rgb_out = sem_sq, rgb_sq
    else:
        sem_out = _nearest_resize(sem_sq, size)
        rgb_out = np.asarray(Image.fromarray(rgb_sq).resize((size, size), Image.BOX))
    new_meta = MapMeta(
        meters_per_pixel=float(s * side / size),
        origin_x=float(meta.origin_x + c0 * s),
        origin_z=float(meta.origin_z + r0 * s),
        height=size,
        width=size,
    )
    return MapBundle(rgb=rgb_out.copy(), occ=derive_occupancy(sem_out), sem=sem_out.copy(), meta=new_meta)
