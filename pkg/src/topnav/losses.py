"""Training objective for path/goal probability maps.

All functions accept ``(H, W)`` or batched ``(B, H, W)`` tensors and return a
scalar mean over every pixel of the batch. Sobel and box filters use
replicate padding so constant maps cost exactly zero.

The "erosion" term is a k x k *mean* filter rather than a
min filter.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F

BCE_CLAMP = 1e-7

@dataclass(frozen=True)
class LossWeights:
    alpha: float = 5.0  # goal BCE
    lam: float = 0.1  # continuity
    beta_grad: float = 0.2
    beta_start: float = 0.5
    beta_erosion: float = 0.3
    start_radius: float = 8.0
    erosion_kernel: int = 3
    erosion_tol: float = 0.3

    def __post_init__(self):
        for name in ("alpha", "lam", "beta_grad", "beta_start", "beta_erosion"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.erosion_kernel % 2 != 1:
            raise ValueError("erosion kernel size must be odd")
        if self.start_radius < 1:
            raise ValueError("start radius must be >= 1")
        if not 0.0 <= self.erosion_tol <= 1.0:
            raise ValueError("erosion tolerance must lie in [0, 1]")

    def as_dict(self):
        return asdict(self)


def _as_batch(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 2:
        return x.unsqueeze(0)
    if x.dim() != 3:
        raise ValueError(f"expected (H, W) or (B, H, W), got {tuple(x.shape)}")
    return x


def bce(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    p = pred.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
    target = target.to(p.dtype)
    return -(target * torch.log(p) + (1.0 - target) * torch.log1p(-p)).mean()


def sobel(path_map: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    # written as weighted neighbour differences so constant maps give exact zeros
    x = _as_batch(path_map).unsqueeze(1)
    q = F.pad(x, (1, 1, 1, 1), mode="replicate").squeeze(1)
    dx = q[:, :, 2:] - q[:, :, :-2]
    dy = q[:, 2:, :] - q[:, :-2, :]
    gx = dx[:, :-2] + 2.0 * dx[:, 1:-1] + dx[:, 2:]
    gy = dy[:, :, :-2] + 2.0 * dy[:, :, 1:-1] + dy[:, :, 2:]
    return gx, gy


def _safe_norm(gx: torch.Tensor, gy: torch.Tensor) -> torch.Tensor:
    # sqrt has an infinite derivative at 0; give flat pixels a zero subgradient
    sq = gx * gx + gy * gy
    positive = sq > 0
    safe = torch.where(positive, sq, torch.ones_like(sq))
    return torch.where(positive, torch.sqrt(safe), torch.zeros_like(sq))


def grad_loss(path_map: torch.Tensor) -> torch.Tensor:
    gx, gy = sobel(path_map)
    return _safe_norm(gx, gy).mean()


def start_target(shape, start, radius: float, dtype=torch.float64) -> tuple[torch.Tensor, torch.Tensor]:
    """Linearly decaying target ``max(0, 1 - d / r)`` and the ``d < r`` disk mask."""
    h, w = shape
    rows = torch.arange(h, dtype=dtype).view(-1, 1)
    cols = torch.arange(w, dtype=dtype).view(1, -1)
    d = torch.sqrt((rows - float(start[0])) ** 2 + (cols - float(start[1])) ** 2)
    return torch.clamp(1.0 - d / radius, min=0.0), d < radius


def start_loss(path_map: torch.Tensor, start, radius: float = 8.0) -> torch.Tensor:
    """MSE to the start cone over the disk. ``start`` is ``(r, c)`` or a ``(B, 2)`` sequence."""
    maps = _as_batch(path_map)
    starts = [start] if path_map.dim() == 2 else list(start)
    if len(starts) != maps.shape[0]:
        raise ValueError("need one start cell per batch element")
    total = maps.new_zeros(())
    count = 0
    for p, s in zip(maps, starts):
        if not (0 <= int(s[0]) < p.shape[0] and 0 <= int(s[1]) < p.shape[1]):
            raise ValueError(f"start {tuple(s)} out of bounds")
        target, disk = start_target(p.shape, s, radius, p.dtype)
        total = total + ((p - target) ** 2)[disk].sum()
        count += int(disk.sum())
    return total / count


def box_filter(path_map: torch.Tensor, k: int = 3) -> torch.Tensor:
    if k % 2 != 1:
        raise ValueError("kernel size must be odd")
    x = _as_batch(path_map).unsqueeze(1)
    pad = k // 2
    padded = F.pad(x, (pad, pad, pad, pad), mode="replicate")
    return F.avg_pool2d(padded, k, stride=1).squeeze(1)


def erosion_loss(path_map: torch.Tensor, k: int = 3, tol: float = 0.3) -> torch.Tensor:
    maps = _as_batch(path_map)
    return F.relu(maps - box_filter(maps, k) - tol).mean()


COMPONENTS = ("path", "goal", "grad", "start", "erosion")


def total_loss(pred_path, pred_goal, target_path, target_goal, start, weights: LossWeights | None = None):
    """Return ``(total, components)``; continuity terms regularize the path map only."""
    w = weights or LossWeights()
    parts = {
        "path": bce(pred_path, target_path),
        "goal": bce(pred_goal, target_goal),
        "grad": grad_loss(pred_path),
        "start": start_loss(pred_path, start, w.start_radius),
        "erosion": erosion_loss(pred_path, w.erosion_kernel, w.erosion_tol),
    }
    continuity = w.beta_grad * parts["grad"] + w.beta_start * parts["start"] + w.beta_erosion * parts["erosion"]
    total = parts["path"] + w.alpha * parts["goal"] + w.lam * continuity
    return total, parts
