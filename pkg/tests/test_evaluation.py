import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topnav.evaluation import (
    DataError, EpisodeResult, OrthogonalityError, compute_metrics, evaluate_run, modality_features,
    orthogonality_analysis,
)
from topnav.gridmap import NUM_CLASSES, MapBundle, MapMeta
from topnav.noise import LEVELS, NoiseSpec, degrade_maps
from topnav.pathformer.config import ModelConfig
from topnav.pathformer.gradcheck import synthetic_pair
from topnav.pathformer.model import PathFormer


def test_success_radius():
    m = compute_metrics([EpisodeResult(True, 5.0, 5.0, 2.9), EpisodeResult(True, 5.0, 5.0, 3.1)])
    assert m.sr == 0.5


def test_spl_formula_and_ne():
    m = compute_metrics([EpisodeResult(True, 10.0, 20.0, 0.0)])
    assert m.spl == 0.5 and m.ne == 0.0 and m.tl == 20.0
    m = compute_metrics([EpisodeResult(True, 10.0, 5.0, 1.0)])
    assert m.spl == 1.0


def test_metric_errors():
    with pytest.raises(DataError):
        compute_metrics([])
    with pytest.raises(DataError):
        compute_metrics([EpisodeResult(True, 0.0, 1.0, 0.0)])
    with pytest.raises(DataError):
        compute_metrics([EpisodeResult(True, 1.0, -1.0, 0.0)])


results = st.lists(
    st.builds(EpisodeResult, st.booleans(), st.floats(0.1, 100), st.floats(0, 200), st.floats(0, 20)),
    min_size=1, max_size=30,
)


@settings(max_examples=200, deadline=None)
@given(results)
def test_spl_never_exceeds_sr(rs):
    m = compute_metrics(rs)
    assert 0 <= m.spl <= m.sr + 1e-12 <= 1 + 1e-12


@settings(max_examples=100, deadline=None)
@given(results, st.randoms())
def test_order_independent(rs, rnd):
    shuffled = list(rs)
    rnd.shuffle(shuffled)
    a, b = compute_metrics(rs), compute_metrics(shuffled)
    assert a.sr == b.sr and a.spl == pytest.approx(b.spl) and a.ne == pytest.approx(b.ne)

# noise


def _bundle(seed=0, size=100):
    rng = np.random.default_rng(seed)
    return MapBundle(
        rng.integers(0, 256, (size, size, 3)).astype(np.uint8),
        rng.integers(0, 2, (size, size)).astype(np.uint8),
        rng.integers(0, NUM_CLASSES, (size, size)).astype(np.uint8),
        MapMeta(0.1, 0.0, 0.0, size, size),
    )


def test_levels():
    assert LEVELS == (0.0, 0.05, 0.10, 0.20, 0.30)
    s = NoiseSpec.combined(0.2, 3)
    assert (s.sem_fraction, s.occ_fraction, s.rgb_sigma, s.seed) == (0.2, 0.2, 51.0, 3)
    with pytest.raises(ValueError):
        NoiseSpec(sem_fraction=1.5)
    with pytest.raises(ValueError):
        NoiseSpec(rgb_sigma=-1)


def test_degrade_identity_and_full_flip():
    b = _bundle()
    assert degrade_maps(b, NoiseSpec.combined(0.0, 1)).equals(b)
    flipped = degrade_maps(b, NoiseSpec(occ_fraction=1.0))
    assert np.array_equal(flipped.occ, 1 - b.occ)
    assert np.array_equal(flipped.sem, b.sem) and np.array_equal(flipped.rgb, b.rgb)


def test_semantic_changed_fraction():
    b = _bundle(size=1000)
    f = 0.3
    out = degrade_maps(b, NoiseSpec(sem_fraction=f, seed=5))
    changed = float((out.sem != b.sem).mean())
    # 1e6 cells: the binomial standard error is ~4.4e-4
    assert changed == pytest.approx(f * 40 / 41, abs=3e-3)


def test_degrade_deterministic_and_nested():
    b = _bundle()
    a1 = degrade_maps(b, NoiseSpec.combined(0.1, 9))
    a2 = degrade_maps(b, NoiseSpec.combined(0.1, 9))
    assert a1.equals(a2)
    hi = degrade_maps(b, NoiseSpec.combined(0.3, 9))
    assert ((a1.occ != b.occ) <= (hi.occ != b.occ)).all()


def test_rgb_noise_stats():
    b = _bundle(size=300).with_maps(rgb=np.full((300, 300, 3), 128, np.uint8))
    out = degrade_maps(b, NoiseSpec(rgb_sigma=10.0, seed=2))
    d = out.rgb.astype(float) - 128
    assert abs(d.mean()) < 0.2 and d.std() == pytest.approx(10.0, rel=0.02)

# harness


@pytest.fixture(scope="module")
def synth_pairs():
    return [synthetic_pair(64, seed=i) for i in range(3)]


def test_oracle_and_still(synth_pairs):
    o = evaluate_run(synth_pairs, agent="oracle").metrics
    assert (o.sr, o.spl, o.ne) == (1.0, 1.0, 0.0)
    s = evaluate_run(synth_pairs, agent="still")
    expected = np.mean([math.dist(ep.start, ep.goal) * b.meta.meters_per_pixel <= 3.0 for ep, b in synth_pairs])
    assert s.metrics.sr == expected and s.metrics.tl == 0.0


def test_model_eval_deterministic(synth_pairs):
    m = PathFormer(ModelConfig()).eval()
    a = evaluate_run(synth_pairs, m, noise_level=0.1, seed=4)
    b = evaluate_run(synth_pairs, m, noise_level=0.1, seed=4)
    assert a.metrics == b.metrics
    z = evaluate_run(synth_pairs, m, noise_level=0.0)
    assert z.metrics.spl <= z.metrics.sr
    assert "SR = " in z.format() and len(z.format().splitlines()) == 8 + len(synth_pairs)


def test_eval_needs_model(synth_pairs):
    with pytest.raises(ValueError):
        evaluate_run(synth_pairs, None, agent="model")
    with pytest.raises(DataError):
        evaluate_run([], None, agent="oracle")

# orthogonality


def test_angles_synthetic():
    e = np.eye(4)
    ang = orthogonality_analysis([e[[0]], e[[0]] * 3, e[[1]], np.array([[1.0, 1, 0, 0]])])
    assert abs(ang[0, 1]) < 1e-6 and abs(ang[0, 2] - 90) < 1e-6
    assert ang[0, 3] == pytest.approx(45.0)
    assert np.array_equal(ang, ang.T) and not np.diag(ang).any()


def test_angle_errors():
    with pytest.raises(OrthogonalityError):
        orthogonality_analysis([np.zeros((2, 3)), np.ones((2, 3))])
    with pytest.raises(OrthogonalityError):
        orthogonality_analysis([np.ones((2, 3)), np.ones((2, 4))])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_angle_matrix_properties(seed):
    rng = np.random.default_rng(seed)
    ang = orthogonality_analysis({k: rng.normal(size=(3, 5)) + 0.01 for k in "abcd"})
    assert np.array_equal(ang, ang.T) and ((ang >= 0) & (ang <= 180)).all() and not np.diag(ang).any()


def test_modality_features(synth_pairs):
    m = PathFormer(ModelConfig()).eval()
    feats = modality_features(m, synth_pairs)
    assert set(feats) == {"visual", "instruction", "rotation", "position"}
    assert all(v.shape == (3, 64) for v in feats.values())
    ang = orthogonality_analysis(feats)
    assert ang.shape == (4, 4) and np.array_equal(ang, ang.T)
