import json

import numpy as np
import pytest

from topnav import cli
from topnav.gridmap import ProbabilityPair
from topnav.mapbuild.dataset import Dataset
from topnav.mapio import read_ppm, save_probabilities


def run(capsys, *argv):
    code = cli.dispatch([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "data"
    code = cli.dispatch(["gen-dataset", "--out", str(d), "--seed", "5", "--train-scenes", "1", "--unseen-scenes", "1",
                         "--train-per-scene", "3", "--val-seen-per-scene", "2", "--val-unseen-per-scene", "2"])
    assert code == cli.EXIT_OK
    return d


@pytest.fixture(scope="module")
def ckpt(data_dir):
    p = data_dir.parent / "m.ckpt"
    assert cli.dispatch(["train", "--data", str(data_dir), "--out", str(p), "--steps", "3", "--batch-size", "2"]) == 0
    return p


def _map_dir(data_dir):
    ds = Dataset(data_dir)
    ep = ds.episodes("val_seen")[0]
    return ds, ep, data_dir / ds.manifest["scenes"][ep.scene]["map"]


def test_unknown_flag_is_usage_error(capsys):
    assert run(capsys, "bench-plan", "--bogus")[0] == cli.EXIT_USAGE == 2
    assert run(capsys, "no-such-command")[0] == 2
    assert run(capsys)[0] == 2


def test_help_documents_defaults(capsys):
    for name in cli.COMMANDS:
        code, out, _ = run(capsys, name, "--help")
        assert code == 0
        assert "default" in out, name
    _, out, _ = run(capsys, "plan", "--help")
    for flag in ("--eps", "--c-obs", "--planner-mode"):
        assert flag in out


def test_exit_codes_distinct():
    codes = [cli.EXIT_OK, cli.EXIT_USAGE, cli.EXIT_CONFIG, cli.EXIT_DATA, cli.EXIT_VERIFY, cli.EXIT_RUNTIME]
    assert len(set(codes)) == len(codes) and cli.EXIT_OK == 0


def test_plan_start_equals_goal(capsys, data_dir, tmp_path):
    ds, ep, maps = _map_dir(data_dir)
    r, c = ep.start
    code, out, _ = run(capsys, "plan", "--maps", maps, "--start", f"{r},{c}", "--goal", f"{r},{c}",
                       "--render", tmp_path / "p.ppm")
    assert code == 0
    doc = json.loads(out)
    assert doc["cells"] == [[r, c]] and len(doc["world"]) == 1 and doc["cost"] == 0.0
    img = read_ppm(tmp_path / "p.ppm")
    assert img.shape[:2] == ds.bundle(ep.scene).meta.shape
    assert tuple(img[r, c]) == (255, 0, 0)


def test_plan_from_probabilities(capsys, data_dir, tmp_path):
    ds, ep, maps = _map_dir(data_dir)
    bundle = ds.bundle(ep.scene)
    goal = np.zeros(bundle.meta.shape)
    goal[ep.goal] = 1.0
    save_probabilities(tmp_path / "prob", ProbabilityPair(np.full(bundle.meta.shape, 0.5), goal), bundle.meta)
    out_json = tmp_path / "w.json"
    code, out, _ = run(capsys, "plan", "--maps", maps, "--start", "{},{}".format(*ep.start),
                       "--probabilities", tmp_path / "prob", "--out", out_json)
    assert code == 0
    doc = json.loads(out_json.read_text())
    assert doc == json.loads(out)
    assert tuple(doc["cells"][0]) == ep.start and tuple(doc["cells"][-1]) == ep.goal


def test_plan_missing_goal_is_config_error(capsys, data_dir):
    _, ep, maps = _map_dir(data_dir)
    assert run(capsys, "plan", "--maps", maps, "--start", "{},{}".format(*ep.start))[0] == cli.EXIT_CONFIG


def test_plan_bad_maps_is_data_error(capsys, tmp_path):
    assert run(capsys, "plan", "--maps", tmp_path / "none", "--start", "0,0", "--goal", "1,1")[0] == cli.EXIT_DATA


def test_bad_cell_is_usage_error(capsys, tmp_path):
    assert run(capsys, "plan", "--maps", tmp_path, "--start", "zero", "--goal", "1,1")[0] == 2


def test_eval_noise_zero_matches_default(capsys, data_dir, ckpt):
    base = ("eval", "--data", data_dir, "--checkpoint", ckpt, "--split", "val_seen")
    c1, a, _ = run(capsys, *base)
    c2, b, _ = run(capsys, *base, "--noise-level", "0")
    assert c1 == c2 == 0 and a == b and "SR" in a


def test_eval_min_sr_verify_failure(capsys, data_dir):
    base = ("eval", "--data", data_dir, "--split", "val_seen")
    assert run(capsys, *base, "--agent", "oracle", "--min-sr", "1.0")[0] == 0
    assert run(capsys, *base, "--agent", "still", "--min-sr", "0.5")[0] == cli.EXIT_VERIFY
    assert run(capsys, *base)[0] == cli.EXIT_CONFIG


def test_degrade_and_ablate(capsys, data_dir, ckpt, tmp_path):
    code, out, _ = run(capsys, "degrade-eval", "--data", data_dir, "--checkpoint", ckpt, "--levels", "0,0.3",
                       "--out", tmp_path / "d.tsv")
    assert code == 0 and out.splitlines()[0] == "level\tSR\tSPL\tTL\tNE" and len(out.splitlines()) == 3
    assert (tmp_path / "d.tsv").read_text() == out
    code, out, _ = run(capsys, "ablate-modality", "--data", data_dir, "--checkpoint", ckpt, "--masks", "rgb+occ+sem,occ")
    assert code == 0 and [l.split("\t")[0] for l in out.splitlines()[1:]] == ["rgb+occ+sem", "occ"]


def test_train_deterministic(capsys, data_dir, tmp_path):
    args = ("train", "--data", data_dir, "--steps", "2", "--batch-size", "2", "--seed", "1")
    assert run(capsys, *args, "--out", tmp_path / "a.ckpt")[0] == 0
    assert run(capsys, *args, "--out", tmp_path / "b.ckpt")[0] == 0
    assert (tmp_path / "a.ckpt.log").read_text() == (tmp_path / "b.ckpt.log").read_text()
    assert (tmp_path / "a.ckpt").read_bytes() != b""


def test_render_episode(capsys, data_dir, ckpt, tmp_path):
    ds, ep, _ = _map_dir(data_dir)
    code, out, _ = run(capsys, "render", "--data", data_dir, "--episode", ep.id, "--checkpoint", ckpt,
                       "--out", tmp_path / "r.ppm")
    assert code == 0
    names = [p.rsplit("/", 1)[-1] for p in out.split()]
    assert names == ["r.ppm", "r_path.pgm", "r_goal.pgm"]
    img = read_ppm(tmp_path / "r.ppm")
    assert img.shape[:2] == ds.bundle(ep.scene).meta.shape
    assert run(capsys, "render", "--data", data_dir, "--episode", "nope", "--out", tmp_path / "x.ppm")[0] == cli.EXIT_DATA


def test_orthogonality(capsys, data_dir, ckpt, tmp_path):
    code, out, _ = run(capsys, "orthogonality", "--data", data_dir, "--checkpoint", ckpt, "--out", tmp_path / "o.json")
    assert code == 0
    m = np.array(json.loads((tmp_path / "o.json").read_text())["degrees"])
    assert m.shape == (4, 4)
    assert np.allclose(m, m.T) and np.all(np.diag(m) == 0)


def test_bench_plan(capsys):
    code, out, _ = run(capsys, "bench-plan", "--trials", "5", "--max-ms", "50")
    assert code == 0 and "median_ms=" in out
    assert run(capsys, "bench-plan", "--size", "32", "--trials", "2", "--max-ms", "0")[0] == cli.EXIT_VERIFY


def test_gradcheck_toy_passes(capsys):
    code, out, _ = run(capsys, "gradcheck", "--per-segment", "2")
    assert code == 0, out
    code, _, _ = run(capsys, "gradcheck", "--per-segment", "1", "--tolerance", "0")
    assert code == cli.EXIT_VERIFY


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[bench-plan]\nsize = 32\ntrials = 2\n")
    code, out, _ = run(capsys, "--config", cfg, "bench-plan")
    assert code == 0 and "size=32 trials=2" in out
    # flags override the file
    code, out, _ = run(capsys, "--config", cfg, "bench-plan", "--trials", "3")
    assert "trials=3" in out
    cfg.write_text("[bench-plan]\nsizes = 32\n")
    assert run(capsys, "--config", cfg, "bench-plan")[0] == cli.EXIT_CONFIG
    cfg.write_text("[nosuch]\na = 1\n")
    assert run(capsys, "--config", cfg, "bench-plan")[0] == cli.EXIT_CONFIG
    cfg.write_text("[bench-plan]\nplanner-mode = diagonal\n")
    assert run(capsys, "--config", cfg, "bench-plan")[0] == cli.EXIT_CONFIG
    assert run(capsys, "--config", tmp_path / "missing.ini", "bench-plan")[0] == cli.EXIT_CONFIG


def test_config_satisfies_required(capsys, data_dir, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(f"[eval]\ndata = {data_dir}\nagent = oracle\nsplit = val_unseen\n")
    code, out, _ = run(capsys, "--config", cfg, "eval")
    assert code == 0 and "SR" in out


def test_topnav_out_default(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("TOPNAV_OUT", str(tmp_path / "o"))
    code, out, _ = run(capsys, "gen-scenes", "--count", "1")
    assert code == 0
    assert out.strip().startswith(str(tmp_path / "o"))


def test_gen_scenes_and_build_maps(capsys, tmp_path):
    assert run(capsys, "gen-scenes", "--out", tmp_path, "--count", "1", "--seed", "7")[0] == 0
    scene = next((tmp_path / "scenes").glob("*.json"))
    code, out, _ = run(capsys, "build-maps", scene, "--out", tmp_path, "--size", "32")
    assert code == 0 and "s=" in out
    assert run(capsys, "build-maps", tmp_path / "missing.json", "--out", tmp_path)[0] == cli.EXIT_DATA
