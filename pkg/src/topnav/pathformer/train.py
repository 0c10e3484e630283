"""Training loop: AdamW, linear warmup then cosine decay, global-norm clipping."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from ..losses import COMPONENTS, LossWeights, total_loss
from ..mapbuild import vocab
from ..mapbuild.augment import AugmentRejected, augment_episode
from ..noise import NoiseSpec, degrade_maps
from .config import ModelConfig
from .data import collate
from .model import PathFormer


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, last_good: dict):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step
        self.last_good = last_good


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 3000
    batch_size: int = 30
    lr: float = 1e-4
    min_lr: float = 1e-6
    weight_decay: float = 0.05
    warmup: float = 0.075  # fraction of the steps
    clip: float = 1.0
    seed: int = 0
    augment: bool = False
    augment_tries: int = 4
    noise_level: float = 0.0  # combined-noise augmentation applied to every sample
    word_dropout: float = 0.0  # chance of replacing each instruction word with <unk>
    weights: LossWeights = field(default_factory=LossWeights)

    @property
    def warmup_steps(self) -> int:
        return max(1, int(round(self.warmup * self.steps)))


def learning_rate(step: int, cfg: TrainConfig) -> float:
    """Rate used at 1-based ``step``: linear to ``lr`` at the end of warmup, cosine to ``min_lr`` at the last step."""
    w = cfg.warmup_steps
    if step <= w:
        return cfg.lr * step / w
    if cfg.steps == w:
        return cfg.lr
    progress = (step - w) / (cfg.steps - w)
    return cfg.min_lr + (cfg.lr - cfg.min_lr) * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class StepRecord:
    step: int
    lr: float
    loss: float
    parts: dict
    grad_norm: float  # before clipping
    clipped_norm: float

    def format(self) -> str:
        parts = " ".join(f"{k}={self.parts[k]:.6f}" for k in COMPONENTS)
        return (f"step={self.step} lr={self.lr:.6e} loss={self.loss:.6f} {parts} "
                f"grad_norm={self.grad_norm:.6f} clipped_norm={self.clipped_norm:.6f}")


def _global_norm(params) -> float:
    sq = [p.grad.detach().pow(2).sum() for p in params if p.grad is not None]
    return float(torch.sqrt(torch.stack(sq).sum())) if sq else 0.0


def prepare_sample(episode, bundle, rng: np.random.Generator, cfg: TrainConfig):
    if cfg.augment:
        for _ in range(cfg.augment_tries):
            try:
                episode, bundle = augment_episode(episode, bundle, seed=int(rng.integers(2**31)))
                break
            except AugmentRejected:
                continue
    if cfg.noise_level > 0:
        bundle = degrade_maps(bundle, NoiseSpec.combined(cfg.noise_level, int(rng.integers(2**31))))
    if cfg.word_dropout > 0:
        drop = rng.random(len(episode.tokens)) < cfg.word_dropout
        episode = replace(episode, tokens=[vocab.SPECIALS[vocab.UNK] if d else t for t, d in zip(episode.tokens, drop)])
    return episode, bundle


def make_optimizer(model: PathFormer, cfg: TrainConfig) -> torch.optim.Optimizer:
    params = [p for p in model.parameters() if p.requires_grad]
    return torch.optim.AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay)


def train_step(model, optimizer, batch, step: int, cfg: TrainConfig, dtype=torch.float32) -> StepRecord:
    lr = learning_rate(step, cfg)
    for g in optimizer.param_groups:
        g["lr"] = lr
    model.train()
    optimizer.zero_grad(set_to_none=True)
    out = model(*batch.inputs(dtype))
    loss, parts = total_loss(out[:, 0], out[:, 1], batch.target_path, batch.target_goal, batch.starts, cfg.weights)
    if not torch.isfinite(loss):
        raise FloatingPointError(step)
    loss.backward()
    params = [p for p in model.parameters() if p.requires_grad]
    pre = float(torch.nn.utils.clip_grad_norm_(params, cfg.clip))
    if not math.isfinite(pre):
        raise FloatingPointError(step)
    post = _global_norm(params)
    # nothing has been modified before this point, so a failure above leaves the model intact
    optimizer.step()
    return StepRecord(step, lr, float(loss.detach()), {k: float(v.detach()) for k, v in parts.items()}, pre, post)


def train(pairs, model_config: ModelConfig | None = None, cfg: TrainConfig | None = None,
          model: PathFormer | None = None, log=None) -> tuple[PathFormer, list[StepRecord]]:
    """Train on ``(episode, bundle)`` pairs. ``log`` receives one formatted line per step."""
    cfg = cfg or TrainConfig()
    pairs = list(pairs)
    if not pairs:
        raise ValueError("training split is empty")
    torch.manual_seed(cfg.seed)
    model = model or PathFormer(model_config or ModelConfig())
    optimizer = make_optimizer(model, cfg)
    rng = np.random.default_rng(cfg.seed)
    order: list[int] = []
    records: list[StepRecord] = []
    for step in range(1, cfg.steps + 1):
        idx = []
        while len(idx) < min(cfg.batch_size, len(pairs)):
            if not order:
                order = list(rng.permutation(len(pairs)))
            idx.append(order.pop())
        batch = collate([prepare_sample(*pairs[i], rng, cfg) for i in idx])
        try:
            rec = train_step(model, optimizer, batch, step, cfg)
        except FloatingPointError:
            raise TrainingDiverged(step, copy.deepcopy(model.state_dict())) from None
        records.append(rec)
        if log:
            log(rec.format())
    model.eval()
    return model, records
