import numpy as np
import pytest

from topnav.gridmap import MapBundle, MapMeta, ProbabilityPair
from topnav.mapio import (
    MapFormatError, load_bundle, load_probabilities, read_f32, read_occupancy, read_pgm, read_ppm,
    read_semantic, save_bundle, save_probabilities, write_f32, write_pgm, write_ppm,
)


@pytest.fixture
def bundle():
    rng = np.random.default_rng(3)
    meta = MapMeta(0.05, -1.25, 2.5, 17, 23)
    return MapBundle(
        rgb=rng.integers(0, 256, (17, 23, 3)).astype(np.uint8),
        occ=rng.integers(0, 2, (17, 23)).astype(np.uint8),
        sem=rng.integers(0, 41, (17, 23)).astype(np.uint8),
        meta=meta,
    )


def test_occupancy_round_trip(tmp_path, bundle):
    write_pgm(tmp_path / "o.pgm", bundle.occ)
    out = read_occupancy(tmp_path / "o.pgm")
    assert out.dtype == np.uint8 and np.array_equal(out, bundle.occ)


def test_pgm_header_layout(tmp_path):
    write_pgm(tmp_path / "a.pgm", np.zeros((2, 3), np.uint8))
    assert (tmp_path / "a.pgm").read_bytes() == b"P5\n3 2\n255\n" + bytes(6)


def test_ppm_round_trip(tmp_path, bundle):
    write_ppm(tmp_path / "c.ppm", bundle.rgb)
    assert (tmp_path / "c.ppm").read_bytes()[:3] == b"P6\n"
    assert np.array_equal(read_ppm(tmp_path / "c.ppm"), bundle.rgb)


def test_reader_accepts_comments(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n# another\n255\n\x01\x02")
    assert read_pgm(tmp_path / "c.pgm").tolist() == [[1, 2]]


def test_semantic_range_enforced(tmp_path):
    a = np.full((3, 3), 40, np.uint8)
    write_pgm(tmp_path / "s.pgm", a)
    assert np.array_equal(read_semantic(tmp_path / "s.pgm"), a)
    a[1, 1] = 41
    write_pgm(tmp_path / "s.pgm", a)
    with pytest.raises(MapFormatError):
        read_semantic(tmp_path / "s.pgm")


def test_truncated_and_wrong_magic(tmp_path):
    write_pgm(tmp_path / "t.pgm", np.zeros((4, 4), np.uint8))
    raw = (tmp_path / "t.pgm").read_bytes()
    (tmp_path / "t.pgm").write_bytes(raw[:-3])
    with pytest.raises(MapFormatError):
        read_pgm(tmp_path / "t.pgm")
    (tmp_path / "t.pgm").write_bytes(raw.replace(b"P5", b"P6", 1))
    with pytest.raises(MapFormatError):
        read_pgm(tmp_path / "t.pgm")
    (tmp_path / "u.pgm").write_bytes(b"P5\n4")
    with pytest.raises(MapFormatError):
        read_pgm(tmp_path / "u.pgm")


def test_bundle_round_trip(tmp_path, bundle):
    save_bundle(tmp_path / "b", bundle)
    assert load_bundle(tmp_path / "b").equals(bundle)


def test_probability_round_trip(tmp_path, bundle):
    rng = np.random.default_rng(0)
    pair = ProbabilityPair(rng.random((17, 23)).astype(np.float32), rng.random((17, 23)).astype(np.float32),
                           bundle.meta)
    save_probabilities(tmp_path / "p", pair)
    back = load_probabilities(tmp_path / "p")
    assert back.meta == bundle.meta
    assert np.array_equal(back.path, pair.path) and np.array_equal(back.goal, pair.goal)


def test_constant_probability_payload(tmp_path):
    meta = MapMeta(0.05, 0.0, 0.0, 5, 7)
    write_f32(tmp_path / "h.f32", np.full((5, 7), 0.5), meta)
    body = (tmp_path / "h.f32").read_bytes()
    assert body == b"\x00\x00\x00\x3f" * 35
    arr, m = read_f32(tmp_path / "h.f32")
    assert m == meta and (arr == 0.5).all()


def test_f32_size_mismatch(tmp_path):
    meta = MapMeta(0.05, 0.0, 0.0, 5, 7)
    write_f32(tmp_path / "h.f32", np.zeros((5, 7)), meta)
    (tmp_path / "h.f32").write_bytes(b"\x00" * 8)
    with pytest.raises(MapFormatError):
        read_f32(tmp_path / "h.f32")
