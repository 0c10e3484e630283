"""Central finite-difference check of autograd gradients, per parameter segment.

Central differences are only valid where the loss is smooth on
``[theta - h, theta + h]``. The network has ReLU units and the erosion term a
hinge, so a probe whose perturbation flips any of those switches is
discarded and replaced by another entry of the same segment.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import torch

from ..gridmap import MapBundle, MapMeta
from ..losses import LossWeights, box_filter, total_loss
from ..mapbuild.episodes import Episode, yaw_quaternion
from .data import collate
from .model import PathFormer, segments
from .train import TrainConfig, make_optimizer

FD_STEP = 1e-5
TOLERANCE = 1e-4
# gradients smaller than this are compared in absolute terms
ABS_FLOOR = 1e-6


class VerificationError(RuntimeError):
    def __init__(self, report: "GradReport"):
        super().__init__("gradient check failed for segments: " + ", ".join(report.failures))
        self.report = report


def relative_error(a: float, b: float, floor: float = ABS_FLOOR) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


@dataclass
class GradReport:
    max_error: dict[str, float] = field(default_factory=dict)
    checked: dict[str, int] = field(default_factory=dict)
    frozen: list[str] = field(default_factory=list)
    tolerance: float = TOLERANCE
    straddled: dict[str, int] = field(default_factory=dict)  # probes dropped for crossing a kink

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.max_error.items() if not v < self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures

    def format(self) -> str:
        lines = [f"{'segment':<16} {'checked':>7} {'kinks':>5} {'max_rel_err':>12}  status"]
        for k, v in self.max_error.items():
            status = "ok" if v < self.tolerance else "FAIL"
            lines.append(f"{k:<16} {self.checked[k]:>7} {self.straddled.get(k, 0):>5} {v:>12.3e}  {status}")
        for k in self.frozen:
            lines.append(f"{k:<16} {0:>7} {0:>5} {0.0:>12.3e}  frozen (analytic gradient 0)")
        lines.append(f"result: {'pass' if self.passed else 'fail'} (tolerance {self.tolerance:g})")
        return "\n".join(lines)


def check_function(fn, x: torch.Tensor, step: float = FD_STEP) -> float:
    """Max relative error between autograd and central differences for scalar ``fn`` at ``x``."""
    x = x.detach().double().clone().requires_grad_(True)
    fn(x).backward()
    analytic = x.grad.detach().clone()
    worst = 0.0
    flat = x.detach().view(-1)
    for i in range(flat.numel()):
        base = flat[i].item()
        with torch.no_grad():
            flat[i] = base + step
            fp = fn(x).item()
            flat[i] = base - step
            fm = fn(x).item()
            flat[i] = base
        worst = max(worst, relative_error(analytic.view(-1)[i].item(), (fp - fm) / (2 * step)))
    return worst


def synthetic_pair(size: int = 64, seed: int = 0) -> tuple[Episode, MapBundle]:
    """A random map with a straight free corridor and an episode along it."""
    rng = np.random.default_rng(seed)
    meta = MapMeta(0.25, 0.0, 0.0, size, size)
    occ = (rng.random((size, size)) < 0.6).astype(np.uint8)
    row = size // 2
    occ[row, 4: size - 4] = 1
    sem = np.where(occ == 1, 2, rng.integers(3, 41, size=(size, size))).astype(np.uint8)
    rgb = rng.integers(0, 256, size=(size, size, 3)).astype(np.uint8)
    cells = [(row, c) for c in range(4, size - 4)]
    ep = Episode(
        id=f"synthetic{seed}", tokens="walk down the corridor and stop at the sofa .".split(),
        p0=((4 + 0.5) * 0.25, (row + 0.5) * 0.25), r0=yaw_quaternion(0.0), waypoints=cells,
        scene="synthetic", goal_class=10,
    )
    return ep, MapBundle(rgb, occ, sem, meta)


class _Switches:
    """Records the on/off state of every ReLU in a model during a forward pass."""

    def __init__(self, model: torch.nn.Module):
        self.states: list[torch.Tensor] = []
        self.handles = [m.register_forward_hook(self._hook) for m in model.modules() if isinstance(m, torch.nn.ReLU)]

    def _hook(self, module, inputs, output):
        self.states.append((inputs[0] > 0).detach())

    def take(self) -> list[torch.Tensor]:
        out, self.states = self.states, []
        return out


def _same(a: list[torch.Tensor], b: list[torch.Tensor]) -> bool:
    return len(a) == len(b) and all(torch.equal(x, y) for x, y in zip(a, b))


def grad_check(model: PathFormer, pairs, weights: LossWeights | None = None, per_segment: int = 6,
               step: float = FD_STEP, tolerance: float = TOLERANCE, seed: int = 0,
               optimizer_steps: int = 1, raise_on_fail: bool = False) -> GradReport:
    """Check every parameter segment of a double-precision copy of ``model``.

    ``optimizer_steps`` AdamW updates are applied first so zero-initialized
    parameters (the depth-mix query and its spatial projection) are checked
    away from zero. Dropout is disabled throughout. Half the probes go to the
    largest analytic gradients, half to random entries.
    """
    model = copy.deepcopy(model).double()
    model.eval()
    batch = collate(pairs, torch.float64)
    weights = weights or LossWeights()
    switches = _Switches(model)

    def loss_fn():
        out = model(*batch.inputs(torch.float64))
        path = out[:, 0]
        hinge = (path - box_filter(path, weights.erosion_kernel) - weights.erosion_tol) > 0
        switches.states.append(hinge.detach())
        return total_loss(path, out[:, 1], batch.target_path, batch.target_goal, batch.starts, weights)[0]

    if optimizer_steps:
        opt = make_optimizer(model, TrainConfig(lr=1e-3))
        for _ in range(optimizer_steps):
            opt.zero_grad(set_to_none=True)
            loss_fn().backward()
            opt.step()
    model.zero_grad(set_to_none=True)
    loss_fn().backward()
    switches.take()

    rng = np.random.default_rng(seed)
    report = GradReport(tolerance=tolerance)
    for seg, params in segments(model).items():
        trainable = [(n, p) for n, p in params if p.requires_grad]
        if not trainable:
            report.frozen.append(seg)
            continue
        sizes = np.array([p.numel() for _, p in trainable], dtype=np.float64)
        offsets = np.cumsum([0] + [int(v) for v in sizes])
        total = int(offsets[-1])
        grads = torch.cat([p.grad.detach().reshape(-1).abs() for _, p in trainable])
        ranked = iter(torch.argsort(grads, descending=True).tolist())
        want_top = min(per_segment // 2, total)
        want = min(per_segment, total)
        seen: set[int] = set()
        worst, checked, dropped = 0.0, 0, 0
        while checked < want and len(seen) < total and dropped < 20 * per_segment:
            flat = next(ranked) if checked < want_top else int(rng.integers(total))
            if flat in seen:
                continue
            seen.add(flat)
            k = int(np.searchsorted(offsets, flat, side="right") - 1)
            p = trainable[k][1]
            i = flat - int(offsets[k])
            view = p.data.view(-1)
            base = view[i].item()
            with torch.no_grad():
                view[i] = base + step
                fp = loss_fn().item()
                plus = switches.take()
                view[i] = base - step
                fm = loss_fn().item()
                minus = switches.take()
                view[i] = base
            if not _same(plus, minus):
                dropped += 1
                continue
            worst = max(worst, relative_error(p.grad.view(-1)[i].item(), (fp - fm) / (2 * step)))
            checked += 1
        report.max_error[seg] = worst
        report.checked[seg] = checked
        report.straddled[seg] = dropped
    if raise_on_fail and not report.passed:
        raise VerificationError(report)
    return report
