import time

import pytest
import torch

from topnav.pathformer.config import ModelConfig
from topnav.pathformer.gradcheck import (
    GradReport, VerificationError, check_function, grad_check, relative_error, synthetic_pair,
)
from topnav.pathformer.model import PathFormer


def test_calibration_quadratic():
    A = torch.randn((5, 5), dtype=torch.float64)
    A = A @ A.T
    err = check_function(lambda x: 0.5 * x @ A @ x + x.sum(), torch.randn(5, dtype=torch.float64))
    assert err < 1e-8


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1.0, 1.1) == pytest.approx(0.1 / 1.1)
    assert relative_error(1e-9, 2e-9) < 1e-2


def test_report_failures():
    r = GradReport(max_error={"a": 1e-6, "b": 1e-3}, checked={"a": 1, "b": 1})
    assert r.failures == ["b"] and not r.passed
    assert "FAIL" in r.format()


@pytest.fixture(scope="module")
def pairs():
    return [synthetic_pair(64, seed=0)]


def test_toy_model_all_segments(pairs):
    model = PathFormer(ModelConfig())
    t = time.perf_counter()
    report = grad_check(model, pairs, per_segment=6)
    elapsed = time.perf_counter() - t
    assert report.passed, report.format()
    assert {"depth_w", "depth_f", "text_embed", "head"} <= set(report.max_error)
    assert elapsed < 300


def test_frozen_segment_listed(pairs):
    model = PathFormer(ModelConfig(freeze_text=True))
    report = grad_check(model, pairs, per_segment=2)
    assert {"text_embed", "text_pos", "text_proj"} <= set(report.frozen)


def test_raise_on_fail(pairs):
    model = PathFormer(ModelConfig())
    with pytest.raises(VerificationError):
        grad_check(model, pairs, per_segment=2, tolerance=0.0, raise_on_fail=True)
