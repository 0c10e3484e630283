"""Episode/bundle pairs to model-ready tensors and rasterized targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..gridmap import MapBundle, MapMeta
from ..mapbuild.episodes import Episode
from ..mapbuild.vocab import PAD

PATH_DILATION = 1
GOAL_RADIUS = 2


def normalized_position(p0, meta: MapMeta) -> tuple[float, float]:
    """World ``(X, Z)`` to ``[-1, 1]`` over the map extent (X along columns, Z along rows)."""
    s = meta.meters_per_pixel
    u = 2.0 * (p0[0] - meta.origin_x) / (meta.width * s) - 1.0
    v = 2.0 * (p0[1] - meta.origin_z) / (meta.height * s) - 1.0
    return (u, v)


def path_target(waypoints, shape, dilation: int = PATH_DILATION) -> np.ndarray:
    """Waypoint cells dilated by a ``(2d+1)^2`` square."""
    t = np.zeros(shape, dtype=np.float32)
    h, w = shape
    for r, c in waypoints:
        t[max(r - dilation, 0): min(r + dilation + 1, h), max(c - dilation, 0): min(c + dilation + 1, w)] = 1.0
    return t


def goal_target(goal, shape, radius: float = GOAL_RADIUS) -> np.ndarray:
    rr, cc = np.indices(shape)
    return (((rr - goal[0]) ** 2 + (cc - goal[1]) ** 2) <= radius * radius).astype(np.float32)


@dataclass
class Batch:
    rgb: torch.Tensor  # (B, H, W, 3) uint8
    occ: torch.Tensor  # (B, H, W) uint8
    sem: torch.Tensor  # (B, H, W) int64
    tokens: torch.Tensor  # (B, N_t) int64, PAD-filled
    pos: torch.Tensor  # (B, 2)
    rot: torch.Tensor  # (B, 4)
    starts: list[tuple[int, int]]
    target_path: torch.Tensor  # (B, H, W)
    target_goal: torch.Tensor  # (B, H, W)

    def inputs(self, dtype=torch.float32) -> tuple:
        return (self.rgb, self.occ, self.sem, self.tokens, self.pos.to(dtype), self.rot.to(dtype))

    def __len__(self):
        return self.rgb.shape[0]


def collate(pairs, dtype=torch.float32) -> Batch:
    """Stack ``(episode, bundle)`` pairs; instructions are right-padded with PAD."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty batch")
    ids = [ep.token_ids() for ep, _ in pairs]
    n = max(len(t) for t in ids)
    tokens = torch.full((len(pairs), n), PAD, dtype=torch.long)
    for i, t in enumerate(ids):
        tokens[i, : len(t)] = torch.tensor(t, dtype=torch.long)
    shape = pairs[0][1].meta.shape
    return Batch(
        rgb=torch.from_numpy(np.stack([b.rgb for _, b in pairs])),
        occ=torch.from_numpy(np.stack([b.occ for _, b in pairs])),
        sem=torch.from_numpy(np.stack([b.sem for _, b in pairs]).astype(np.int64)),
        tokens=tokens,
        pos=torch.tensor([normalized_position(ep.p0, b.meta) for ep, b in pairs], dtype=torch.float64).to(dtype),
        rot=torch.tensor([ep.r0 for ep, _ in pairs], dtype=torch.float64).to(dtype),
        starts=[tuple(ep.start) for ep, _ in pairs],
        target_path=torch.from_numpy(np.stack([path_target(ep.waypoints, shape) for ep, _ in pairs])).to(dtype),
        target_goal=torch.from_numpy(np.stack([goal_target(ep.goal, shape) for ep, _ in pairs])).to(dtype),
    )


def predict(model, episode: Episode, bundle: MapBundle, mask=None, mode=None) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation-mode forward for one episode; returns float64 ``(path, goal)`` maps."""
    was_training = model.training
    model.eval()
    dtype = model.pos_embed.dtype
    try:
        with torch.no_grad():
            b = collate([(episode, bundle)], dtype)
            out = model(*b.inputs(dtype), mask=mask, mode=mode)
    finally:
        model.train(was_training)
    return out[0, 0].double().numpy(), out[0, 1].double().numpy()
