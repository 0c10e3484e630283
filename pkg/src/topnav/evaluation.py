"""Navigation metrics, the evaluation harness and the modality-orthogonality analysis."""

from __future__ import annotations

import math
import zlib
from dataclasses import asdict, dataclass

import numpy as np
import torch

from .gridmap import ChannelMask, cell_center
from .noise import LEVELS, NoiseSpec, degrade_maps
from .planner import PlannerError, PlannerParams, extract_path, geodesic_path, metric_length

SUCCESS_RADIUS = 3.0  # meters
MODALITY_NAMES = ("visual", "instruction", "rotation", "position")
AGENTS = ("model", "oracle", "still")

__all__ = [
    "LEVELS", "NoiseSpec", "degrade_maps", "EpisodeResult", "Metrics", "compute_metrics",
    "evaluate_run", "orthogonality_analysis", "modality_features", "RunReport",
]


class DataError(ValueError):
    pass


class OrthogonalityError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    shortest: float  # meters, geodesic on the clean occupancy
    length: float  # meters actually travelled
    error: float  # meters from final position to goal
    episode: str = ""
    planner_failed: bool = False

    @property
    def spl(self) -> float:
        return float(self.success) * self.shortest / max(self.shortest, self.length)


@dataclass(frozen=True)
class Metrics:
    sr: float
    spl: float
    tl: float
    ne: float
    episodes: int

    def as_dict(self) -> dict:
        return asdict(self)


def compute_metrics(results, threshold: float = SUCCESS_RADIUS) -> Metrics:
    """SR, SPL, TL and NE; success is re-derived from each result's error and ``threshold``."""
    results = list(results)
    if not results:
        raise DataError("no episode results")
    for r in results:
        if not r.shortest > 0:
            raise DataError(f"episode {r.episode!r}: shortest-path length must be > 0, got {r.shortest}")
        if r.length < 0 or r.error < 0:
            raise DataError(f"episode {r.episode!r}: negative length or error")
    ok = [r.error <= threshold for r in results]
    spl = [s * r.shortest / max(r.shortest, r.length) for s, r in zip(ok, results)]
    n = len(results)
    return Metrics(
        sr=sum(ok) / n,
        spl=float(sum(spl)) / n,
        tl=float(sum(r.length for r in results)) / n,
        ne=float(sum(r.error for r in results)) / n,
        episodes=n,
    )


def episode_seed(seed: int, episode_id: str) -> int:
    return (seed * 1_000_003 + zlib.crc32(episode_id.encode())) % 2**32


def _distance(a, b, meta) -> float:
    (x0, z0), (x1, z1) = cell_center(a[0], a[1], meta), cell_center(b[0], b[1], meta)
    return math.hypot(x1 - x0, z1 - z0)


def run_episode(episode, bundle, agent: str = "model", model=None, planner: PlannerParams | None = None,
                noise: NoiseSpec | None = None, mask: ChannelMask | None = None, mode=None,
                threshold: float = SUCCESS_RADIUS) -> tuple[EpisodeResult, list]:
    """Score one episode; returns the result and the executed cell sequence."""
    from .pathformer.data import predict

    meta = bundle.meta
    s = meta.meters_per_pixel
    start, goal = tuple(episode.start), tuple(episode.goal)
    shortest = metric_length(geodesic_path(bundle.occ, start, goal), s)
    seen = degrade_maps(bundle, noise) if noise is not None else bundle
    failed = False
    if agent == "oracle":
        cells = list(episode.waypoints)
    elif agent == "still":
        cells = [start]
    elif agent == "model":
        if model is None:
            raise ValueError("model agent needs a model")
        path_map, goal_map = predict(model, episode, seen, mask=mask, mode=mode)
        try:
            cells = extract_path(path_map, goal_map, seen.occ, start, planner).cells
        except PlannerError:
            cells, failed = [], True
    else:
        raise ValueError(f"unknown agent {agent!r}; choose from {AGENTS}")
    if failed:
        err = _distance(start, goal, meta)
        return EpisodeResult(False, shortest, 0.0, err, episode.id, True), []
    err = _distance(cells[-1], goal, meta)
    return EpisodeResult(err <= threshold, shortest, metric_length(cells, s), err, episode.id), cells


@dataclass
class RunReport:
    metrics: Metrics
    results: list[EpisodeResult]
    noise_level: float = 0.0

    def format(self) -> str:
        m = self.metrics
        lines = [
            f"episodes = {m.episodes}",
            f"noise_level = {self.noise_level:g}",
            f"SR = {m.sr:.6f}",
            f"SPL = {m.spl:.6f}",
            f"TL = {m.tl:.6f}",
            f"NE = {m.ne:.6f}",
            "",
            "episode\tsuccess\tshortest_m\tlength_m\terror_m\tplanner_failed",
        ]
        for r in self.results:
            lines.append(f"{r.episode}\t{int(r.success)}\t{r.shortest:.6f}\t{r.length:.6f}\t{r.error:.6f}\t{int(r.planner_failed)}")
        return "\n".join(lines) + "\n"


def evaluate_run(pairs, model=None, planner: PlannerParams | None = None, noise_level: float = 0.0,
                 agent: str = "model", seed: int = 0, mask: ChannelMask | None = None, mode=None,
                 threshold: float = SUCCESS_RADIUS) -> RunReport:
    """Evaluate every ``(episode, bundle)`` pair; noise is seeded per (seed, episode id)."""
    pairs = list(pairs)
    if not pairs:
        raise DataError("evaluation split is empty")
    results = []
    for ep, bundle in pairs:
        noise = NoiseSpec.combined(noise_level, episode_seed(seed, ep.id)) if noise_level > 0 else None
        res, _ = run_episode(ep, bundle, agent, model, planner, noise, mask, mode, threshold)
        results.append(res)
    return RunReport(compute_metrics(results, threshold), results, noise_level)


def orthogonality_analysis(features) -> np.ndarray:
    """Pairwise angles in degrees between the mean vectors of each modality's features.

    ``features`` is a sequence (or name-keyed mapping) of ``(n_i, D)`` arrays.
    """
    if isinstance(features, dict):
        features = [features[k] for k in features]
    means = []
    for i, f in enumerate(features):
        f = np.atleast_2d(np.asarray(f, dtype=np.float64))
        if f.shape[0] < 1:
            raise OrthogonalityError(f"modality {i} has no feature vectors")
        means.append(f.mean(axis=0))
    widths = {m.shape[0] for m in means}
    if len(widths) != 1:
        raise OrthogonalityError(f"feature widths differ: {sorted(widths)}")
    norms = [np.linalg.norm(m) for m in means]
    if min(norms) == 0.0:
        raise OrthogonalityError("a modality mean vector is zero; its angle is undefined")
    k = len(means)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            cos = float(np.dot(means[i], means[j]) / (norms[i] * norms[j]))
            out[i, j] = out[j, i] = math.degrees(math.acos(min(1.0, max(-1.0, cos))))
    return out


def modality_features(model, pairs) -> dict[str, np.ndarray]:
    """Per-episode mean feature of each modality as it enters the fusion stage."""
    from .pathformer.data import collate

    model.eval()
    dtype = model.pos_embed.dtype
    rows: dict[str, list] = {k: [] for k in MODALITY_NAMES}
    with torch.no_grad():
        for ep, bundle in pairs:
            b = collate([(ep, bundle)], dtype)
            _, tr = model(*b.inputs(dtype), trace=True)
            keep = ~tr.text_padding[0]
            rows["visual"].append(tr.visual[0].mean(0).double().numpy())
            rows["instruction"].append(tr.text[0][keep].mean(0).double().numpy())
            rows["rotation"].append(tr.h_rot[0].double().numpy())
            rows["position"].append(tr.h_pos[0].double().numpy())
    return {k: np.stack(v) for k, v in rows.items()}
