import numpy as np
import pytest
import torch

import topnav.pathformer.train as train_mod
from topnav.pathformer.config import ModelConfig
from topnav.pathformer.gradcheck import synthetic_pair
from topnav.pathformer.train import TrainConfig, TrainingDiverged, learning_rate, train


def test_lr_schedule_trace():
    cfg = TrainConfig(steps=1000, lr=1e-4, min_lr=1e-6, warmup=0.1)
    assert cfg.warmup_steps == 100
    assert learning_rate(100, cfg) == pytest.approx(1e-4, rel=1e-12)
    assert learning_rate(1000, cfg) == pytest.approx(1e-6, rel=1e-12)
    assert learning_rate(1, cfg) == pytest.approx(1e-6)
    trace = [learning_rate(s, cfg) for s in range(1, 1001)]
    assert all(b >= a for a, b in zip(trace[:100], trace[1:100]))
    assert all(b <= a for a, b in zip(trace[100:], trace[101:]))
    assert min(trace) >= 1e-6 - 1e-18


def test_defaults():
    cfg = TrainConfig()
    assert (cfg.lr, cfg.min_lr, cfg.weight_decay, cfg.clip, cfg.batch_size) == (1e-4, 1e-6, 0.05, 1.0, 30)
    assert cfg.warmup == pytest.approx(30 / 400)


def _pairs(n=4):
    return [synthetic_pair(64, seed=i) for i in range(n)]


def test_short_run_records_and_clipping():
    model, recs = train(_pairs(), ModelConfig(), TrainConfig(steps=6, batch_size=2, lr=1e-3))
    assert [r.step for r in recs] == list(range(1, 7))
    assert all(r.clipped_norm <= 1.0 + 1e-6 for r in recs)
    assert any(r.grad_norm > 1.0 for r in recs)
    assert recs[-1].lr == pytest.approx(1e-6)
    line = recs[0].format()
    for key in ("step=1", "lr=", "loss=", "path=", "goal=", "grad=", "start=", "erosion=", "grad_norm="):
        assert key in line
    assert not model.training


def test_training_deterministic():
    cfg = TrainConfig(steps=3, batch_size=2, lr=1e-3)
    a, ra = train(_pairs(), ModelConfig(), cfg)
    b, rb = train(_pairs(), ModelConfig(), cfg)
    assert [r.loss for r in ra] == [r.loss for r in rb]
    for p, q in zip(a.parameters(), b.parameters()):
        assert torch.equal(p, q)


def test_augmented_and_noisy_run():
    cfg = TrainConfig(steps=2, batch_size=2, augment=True, noise_level=0.1)
    _, recs = train(_pairs(), ModelConfig(), cfg)
    assert all(np.isfinite(r.loss) for r in recs)


def test_divergence_restores_last_good(monkeypatch):
    real = train_mod.total_loss
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        total, parts = real(*args, **kwargs)
        return (total * float("nan") if calls["n"] == 3 else total), parts

    monkeypatch.setattr(train_mod, "total_loss", flaky)
    with pytest.raises(TrainingDiverged) as info:
        train(_pairs(), ModelConfig(), TrainConfig(steps=5, batch_size=2, lr=1e-3))
    assert info.value.step == 3
    assert all(torch.isfinite(v).all() for v in info.value.last_good.values() if v.is_floating_point())


def test_empty_split():
    with pytest.raises(ValueError):
        train([], ModelConfig(), TrainConfig(steps=1))


@pytest.mark.slow
def test_overfit_ten_episodes():
    pairs = [synthetic_pair(64, seed=i) for i in range(10)]
    cfg = TrainConfig(steps=2000, batch_size=10, lr=1e-3)
    _, recs = train(pairs, ModelConfig(), cfg)
    best = min(r.loss for r in recs)
    assert best < 0.05 and best < recs[0].loss / 10


def test_word_dropout():
    from topnav.pathformer.train import prepare_sample

    ep, bundle = _pairs(1)[0]
    same, _ = prepare_sample(ep, bundle, np.random.default_rng(0), TrainConfig())
    assert same.tokens == ep.tokens
    masked, _ = prepare_sample(ep, bundle, np.random.default_rng(0), TrainConfig(word_dropout=1.0))
    assert masked.tokens == ["<unk>"] * len(ep.tokens) and masked.waypoints == ep.waypoints
    a, _ = prepare_sample(ep, bundle, np.random.default_rng(1), TrainConfig(word_dropout=0.5))
    b, _ = prepare_sample(ep, bundle, np.random.default_rng(1), TrainConfig(word_dropout=0.5))
    assert a.tokens == b.tokens != ep.tokens
    assert ep.tokens != masked.tokens  # the source episode is untouched
