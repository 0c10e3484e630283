"""Readers and writers for map files.

Byte layouts:

* occupancy / semantic: binary PGM ``P5``, maxval 255, one byte per cell,
  cell value = occupancy bit or class id.
* RGB: binary PPM ``P6``, maxval 255, three bytes per cell in R, G, B order.
* probability maps: raw little-endian float32, row-major, ``H * W * 4`` bytes,
  plus a ``.meta`` sidecar of ``key = value`` lines (height, width,
  meters_per_pixel, origin_x, origin_z).

Headers are written as ``P5\\n<W> <H>\\n255\\n`` with no comments. The readers
accept comments and arbitrary whitespace between header tokens.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .gridmap import NUM_CLASSES, MapBundle, MapError, MapMeta, ProbabilityPair


class MapFormatError(MapError):
    pass


def _write_pnm(path, magic: bytes, array: np.ndarray) -> None:
    h, w = array.shape[:2]
    header = magic + b"\n%d %d\n255\n" % (w, h)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(array, dtype=np.uint8).tobytes())


def _read_pnm(path, magic: bytes, channels: int) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise MapFormatError(f"{path}: truncated header")
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    pos += 1
    if tokens[0] != magic:
        raise MapFormatError(f"{path}: expected {magic!r}, found {tokens[0]!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MapFormatError(f"{path}: bad header {tokens!r}") from exc
    if maxval != 255:
        raise MapFormatError(f"{path}: maxval {maxval} unsupported (need 255)")
    expected = w * h * channels
    body = data[pos:]
    if len(body) != expected:
        raise MapFormatError(f"{path}: body has {len(body)} bytes, header implies {expected}")
    arr = np.frombuffer(body, dtype=np.uint8)
    shape = (h, w, channels) if channels > 1 else (h, w)
    return arr.reshape(shape).copy()


def write_pgm(path, array) -> None:
    array = np.asarray(array)
    if array.ndim != 2:
        raise MapFormatError("PGM needs a 2-D array")
    _write_pnm(path, b"P5", array)


def read_pgm(path) -> np.ndarray:
    return _read_pnm(path, b"P5", 1)


def write_ppm(path, array) -> None:
    array = np.asarray(array)
    if array.ndim != 3 or array.shape[2] != 3:
        raise MapFormatError("PPM needs an (H, W, 3) array")
    _write_pnm(path, b"P6", array)


def read_ppm(path) -> np.ndarray:
    return _read_pnm(path, b"P6", 3)


def read_semantic(path) -> np.ndarray:
    sem = read_pgm(path)
    if sem.max(initial=0) >= NUM_CLASSES:
        raise MapFormatError(f"{path}: class id {int(sem.max())} >= {NUM_CLASSES}")
    return sem


def read_occupancy(path) -> np.ndarray:
    occ = read_pgm(path)
    if occ.max(initial=0) > 1:
        raise MapFormatError(f"{path}: occupancy values must be 0/1")
    return occ


# -- sidecar metadata -------------------------------------------------------

def format_meta(meta: MapMeta) -> str:
    return (
        f"height = {meta.height}\n"
        f"width = {meta.width}\n"
        f"meters_per_pixel = {meta.meters_per_pixel!r}\n"
        f"origin_x = {meta.origin_x!r}\n"
        f"origin_z = {meta.origin_z!r}\n"
    )


def parse_meta(text: str) -> MapMeta:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise MapFormatError(f"meta line {lineno}: expected 'key = value'")
        values[key.strip()] = value.strip()
    required = ("height", "width", "meters_per_pixel", "origin_x", "origin_z")
    missing = [k for k in required if k not in values]
    if missing:
        raise MapFormatError(f"meta missing keys {missing}")
    try:
        return MapMeta(
            meters_per_pixel=float(values["meters_per_pixel"]),
            origin_x=float(values["origin_x"]),
            origin_z=float(values["origin_z"]),
            height=int(values["height"]),
            width=int(values["width"]),
        )
    except ValueError as exc:
        raise MapFormatError(f"bad meta value: {exc}") from exc


def write_meta(path, meta: MapMeta) -> None:
    Path(path).write_text(format_meta(meta))


def read_meta(path) -> MapMeta:
    return parse_meta(Path(path).read_text())


# -- probability maps -------------------------------------------------------

def write_f32(path, array, meta: MapMeta) -> None:
    """Write ``array`` as raw LE float32 at ``path`` and its sidecar at ``path + '.meta'``."""
    array = np.asarray(array)
    if array.shape != meta.shape:
        raise MapFormatError(f"array {array.shape} does not match meta {meta.shape}")
    Path(path).write_bytes(np.ascontiguousarray(array, dtype="<f4").tobytes())
    write_meta(str(path) + ".meta", meta)


def read_f32(path) -> tuple[np.ndarray, MapMeta]:
    meta = read_meta(str(path) + ".meta")
    body = Path(path).read_bytes()
    if len(body) != meta.height * meta.width * 4:
        raise MapFormatError(
            f"{path}: {len(body)} bytes, expected {meta.height * meta.width * 4}"
        )
    return np.frombuffer(body, dtype="<f4").reshape(meta.shape).copy(), meta


# -- bundles ----------------------------------------------------------------

BUNDLE_FILES = {"rgb": "rgb.ppm", "occ": "occ.pgm", "sem": "sem.pgm", "meta": "map.meta"}


def save_bundle(directory, bundle: MapBundle) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_ppm(d / BUNDLE_FILES["rgb"], bundle.rgb)
    write_pgm(d / BUNDLE_FILES["occ"], bundle.occ)
    write_pgm(d / BUNDLE_FILES["sem"], bundle.sem)
    write_meta(d / BUNDLE_FILES["meta"], bundle.meta)


def load_bundle(directory) -> MapBundle:
    d = Path(directory)
    meta = read_meta(d / BUNDLE_FILES["meta"])
    rgb = read_ppm(d / BUNDLE_FILES["rgb"])
    occ = read_occupancy(d / BUNDLE_FILES["occ"])
    sem = read_semantic(d / BUNDLE_FILES["sem"])
    for name, arr in (("rgb", rgb), ("occ", occ), ("sem", sem)):
        if arr.shape[:2] != meta.shape:
            raise MapFormatError(f"{name} is {arr.shape[:2]}, meta says {meta.shape}")
    return MapBundle(rgb=rgb, occ=occ, sem=sem, meta=meta)


def save_probabilities(directory, pair: ProbabilityPair, meta: MapMeta | None = None) -> None:
    meta = meta or pair.meta
    if meta is None:
        raise MapFormatError("probability maps need a MapMeta")
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_f32(d / "path.f32", pair.path, meta)
    write_f32(d / "goal.f32", pair.goal, meta)


def load_probabilities(directory) -> ProbabilityPair:
    d = Path(directory)
    path, meta = read_f32(d / "path.f32")
    goal, goal_meta = read_f32(d / "goal.f32")
    if goal_meta != meta:
        raise MapFormatError("path and goal sidecars disagree")
    return ProbabilityPair(path=path, goal=goal, meta=meta)
