"""On-disk dataset: scenes, map bundles, episodes and a split manifest.

Layout::

    manifest.json
    scenes/<scene>.json
    maps/<scene>/{rgb.ppm, occ.pgm, sem.pgm, map.meta}
    episodes/<split>/<episode>.json
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..gridmap import MapBundle
from ..mapio import load_bundle, save_bundle
from .episodes import Episode, EpisodeConfig, EpisodeError, generate_episode
from .explore import ExploreConfig
from .pipeline import build_maps
from .scene import Scene, SceneConfig, generate_scene

SPLITS = ("train", "val_seen", "val_unseen")
MANIFEST_VERSION = 1


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    seed: int = 0
    train_scenes: int = 10
    unseen_scenes: int = 3
    train_per_scene: int = 20
    val_seen_per_scene: int = 5
    val_unseen_per_scene: int = 5
    map_size: int = 64
    min_distance: float = 6.0
    scene: SceneConfig = field(default_factory=SceneConfig)


def scene_name(seed: int) -> str:
    return f"scene_{seed:05d}"


def scene_seeds(config: DatasetConfig) -> tuple[list[int], list[int]]:
    base = config.seed * 1000
    total = config.train_scenes + config.unseen_scenes
    seeds = [base + i for i in range(total)]
    return seeds[: config.train_scenes], seeds[config.train_scenes:]


def write_scenes(out_dir, seeds, config: SceneConfig | None = None) -> list[Path]:
    out = Path(out_dir) / "scenes"
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for seed in seeds:
        p = out / f"{scene_name(seed)}.json"
        p.write_text(generate_scene(seed, config).to_json() + "\n")
        paths.append(p)
    return paths


def load_scene(path) -> Scene:
    return Scene.from_json(Path(path).read_text())


def build_scene_maps(scene_path, out_dir, size: int = 64, explore: ExploreConfig | None = None) -> MapBundle:
    scene = load_scene(scene_path)
    bundle, _ = build_maps(scene, size, explore)
    save_bundle(Path(out_dir) / "maps" / Path(scene_path).stem, bundle)
    return bundle


def _episodes_for(scene, bundle, name, count, seed0, prefix, taken, config: DatasetConfig):
    eps = []
    cfg = EpisodeConfig(min_distance=config.min_distance)
    seed = seed0
    while len(eps) < count:
        if seed - seed0 > 20 * count:
            raise DatasetError(f"{name}: could only draw {len(eps)} of {count} distinct episodes")
        try:
            ep = generate_episode(scene, bundle, seed, cfg, episode_id=f"{name}_{prefix}{len(eps):03d}",
                                  scene_id=name, exclude=taken)
        except EpisodeError:
            seed += 1
            continue
        seed += 1
        taken.add((ep.start, ep.goal))
        eps.append(ep)
    return eps


def generate_dataset(out_dir, config: DatasetConfig | None = None, log=None) -> dict:
    """Generate every scene, map and episode; returns the manifest."""
    config = config or DatasetConfig()
    out = Path(out_dir)
    train_seeds, unseen_seeds = scene_seeds(config)
    splits: dict[str, list[str]] = {s: [] for s in SPLITS}
    scenes = {}
    for seed in train_seeds + unseen_seeds:
        name = scene_name(seed)
        (scene_path,) = write_scenes(out, [seed], config.scene)
        scene = load_scene(scene_path)
        bundle = build_scene_maps(scene_path, out, config.map_size)
        seen = seed in train_seeds
        scenes[name] = {"seed": seed, "seen": seen, "map": f"maps/{name}", "scene": f"scenes/{name}.json"}
        taken: set = set()
        plan = (
            [("train", config.train_per_scene, "t"), ("val_seen", config.val_seen_per_scene, "v")]
            if seen else [("val_unseen", config.val_unseen_per_scene, "u")]
        )
        for split, count, prefix in plan:
            eps = _episodes_for(scene, bundle, name, count, seed * 100_000 + len(taken) * 977, prefix, taken, config)
            d = out / "episodes" / split
            d.mkdir(parents=True, exist_ok=True)
            for ep in eps:
                ep.save(d / f"{ep.id}.json")
                splits[split].append(f"episodes/{split}/{ep.id}.json")
        if log:
            log(f"{name}: s={bundle.meta.meters_per_pixel:.4f} m/px free={bundle.occ.mean():.3f}")
    manifest = {"version": MANIFEST_VERSION, "config": _config_dict(config), "scenes": scenes, "splits": splits}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest


def _config_dict(config: DatasetConfig) -> dict:
    d = asdict(config)
    d["scene"] = {k: list(v) if isinstance(v, tuple) else v for k, v in d["scene"].items()}
    return d


class Dataset:
    """Read-side view of a generated dataset directory; bundles are loaded once and cached."""

    def __init__(self, root):
        self.root = Path(root)
        path = self.root / "manifest.json"
        try:
            self.manifest = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DatasetError(f"cannot read manifest {path}: {exc}") from exc
        if self.manifest.get("version") != MANIFEST_VERSION:
            raise DatasetError(f"unsupported manifest version {self.manifest.get('version')}")
        self._bundles: dict[str, MapBundle] = {}
        self._scenes: dict[str, Scene] = {}

    def episodes(self, split: str) -> list[Episode]:
        if split not in SPLITS:
            raise DatasetError(f"unknown split {split!r}; expected one of {SPLITS}")
        return [Episode.load(self.root / p) for p in self.manifest["splits"][split]]

    def bundle(self, scene: str) -> MapBundle:
        if scene not in self._bundles:
            self._bundles[scene] = load_bundle(self.root / self.manifest["scenes"][scene]["map"])
        return self._bundles[scene]

    def scene(self, scene: str) -> Scene:
        if scene not in self._scenes:
            self._scenes[scene] = load_scene(self.root / self.manifest["scenes"][scene]["scene"])
        return self._scenes[scene]

    def pairs(self, split: str) -> list[tuple[Episode, MapBundle]]:
        return [(ep, self.bundle(ep.scene)) for ep in self.episodes(split)]
