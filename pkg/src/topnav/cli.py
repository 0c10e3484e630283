"""Command-line entry point: ``topnav <subcommand> [flags]``.

Every flag can also be set in an INI file passed with ``--config``; the
section named after the subcommand (``[train]``, ``[eval]``, ...) supplies
defaults and command-line flags override it. Unknown keys are rejected.
``TOPNAV_OUT`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from .gridmap import MODALITIES, ChannelMask, MapError, cell_center, world_to_pixel
from .losses import LossWeights

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_VERIFY = 5
EXIT_RUNTIME = 6

OUT_ENV = "TOPNAV_OUT"


class ConfigFileError(ValueError):
    pass


class VerifyFailed(RuntimeError):
    pass


def _out_default(name: str) -> str:
    return str(Path(os.environ.get(OUT_ENV, "out")) / name)


def _cell(text: str) -> tuple[int, int]:
    try:
        r, c = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected R,C got {text!r}") from None
    return (r, c)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _bool(text: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---- argument groups shared between subcommands ---------------------------------


def _add_planner(p):
    g = p.add_argument_group("planner")
    g.add_argument("--eps", type=float, default=0.01, help="cost-map stabilizer (default: %(default)s)")
    g.add_argument("--c-obs", type=float, default=1000.0, help="obstacle cost (default: %(default)s)")
    g.add_argument("--planner-mode", choices=("hard", "soft"), default="hard",
                   help="hard: obstacles impassable; soft: obstacles cost c_obs (default: %(default)s)")
    g.add_argument("--literal-heuristic", type=_bool, default=False,
                   help="use plain Euclidean distance as the A* heuristic (default: %(default)s)")


def _planner(args):
    from .planner import Mode, PlannerParams

    return PlannerParams(eps=args.eps, c_obs=args.c_obs, mode=Mode(args.planner_mode),
                         literal_heuristic=args.literal_heuristic)


def _add_loss(p):
    d = LossWeights()
    g = p.add_argument_group("loss weights")
    g.add_argument("--alpha", type=float, default=d.alpha, help="goal BCE weight (default: %(default)s)")
    g.add_argument("--lam", type=float, default=d.lam, help="continuity weight (default: %(default)s)")
    g.add_argument("--beta-grad", type=float, default=d.beta_grad, help="(default: %(default)s)")
    g.add_argument("--beta-start", type=float, default=d.beta_start, help="(default: %(default)s)")
    g.add_argument("--beta-erosion", type=float, default=d.beta_erosion, help="(default: %(default)s)")
    g.add_argument("--start-radius", type=float, default=d.start_radius, help="pixels (default: %(default)s)")
    g.add_argument("--erosion-kernel", type=int, default=d.erosion_kernel, help="(default: %(default)s)")
    g.add_argument("--erosion-tol", type=float, default=d.erosion_tol, help="(default: %(default)s)")


def _loss(args) -> LossWeights:
    return LossWeights(args.alpha, args.lam, args.beta_grad, args.beta_start, args.beta_erosion,
                       args.start_radius, args.erosion_kernel, args.erosion_tol)


def _add_eval_common(p):
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--checkpoint", help="model checkpoint (required for the model agent)")
    p.add_argument("--split", default="val_seen", choices=("train", "val_seen", "val_unseen"),
                   help="(default: %(default)s)")
    p.add_argument("--agent", default="model", choices=("model", "oracle", "still"), help="(default: %(default)s)")
    p.add_argument("--mode", choices=("STD", "AR_FULL", "AR_FULL_SQ"), help="override the checkpoint's attention mode")
    p.add_argument("--seed", type=int, default=0, help="noise seed (default: %(default)s)")
    p.add_argument("--threshold", type=float, default=3.0, help="success radius in meters (default: %(default)s)")
    p.add_argument("--limit", type=int, default=0, help="evaluate only the first N episodes (0 = all)")
    _add_planner(p)


def build_parser() -> argparse.ArgumentParser:
    from .mapbuild.dataset import DatasetConfig
    from .pathformer.train import TrainConfig
    from .pathformer.config import ModelConfig

    ap = _Parser(prog="topnav", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="INI file with per-subcommand sections")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    dd = DatasetConfig()
    td = TrainConfig()

    p = sub.add_parser("gen-scenes", help="generate procedural scenes as JSON")
    p.add_argument("--out", default=_out_default("data"), help="output directory (default: %(default)s)")
    p.add_argument("--count", type=int, default=4, help="(default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="first scene seed (default: %(default)s)")
    p.add_argument("--rooms", type=int, default=5, help="(default: %(default)s)")
    p.add_argument("--objects", type=int, default=10, help="(default: %(default)s)")

    p = sub.add_parser("build-maps", help="explore scenes and project RGB/occupancy/semantic maps")
    p.add_argument("scenes", nargs="+", help="scene JSON files")
    p.add_argument("--out", default=_out_default("data"), help="output directory (default: %(default)s)")
    p.add_argument("--size", type=int, default=64, help="map side in pixels (default: %(default)s)")

    p = sub.add_parser("gen-dataset", help="scenes, maps and episodes with train/val_seen/val_unseen splits")
    p.add_argument("--out", default=_out_default("data"), help="(default: %(default)s)")
    p.add_argument("--seed", type=int, default=dd.seed, help="(default: %(default)s)")
    p.add_argument("--train-scenes", type=int, default=dd.train_scenes, help="(default: %(default)s)")
    p.add_argument("--unseen-scenes", type=int, default=dd.unseen_scenes, help="(default: %(default)s)")
    p.add_argument("--train-per-scene", type=int, default=dd.train_per_scene, help="(default: %(default)s)")
    p.add_argument("--val-seen-per-scene", type=int, default=dd.val_seen_per_scene, help="(default: %(default)s)")
    p.add_argument("--val-unseen-per-scene", type=int, default=dd.val_unseen_per_scene, help="(default: %(default)s)")
    p.add_argument("--size", type=int, default=dd.map_size, help="(default: %(default)s)")
    p.add_argument("--min-distance", type=float, default=dd.min_distance, help="meters (default: %(default)s)")

    p = sub.add_parser("train", help="train the path/goal model")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", default=_out_default("model.ckpt"), help="checkpoint path (default: %(default)s)")
    p.add_argument("--log", help="per-step text log (default: <out>.log)")
    p.add_argument("--preset", default="toy", choices=("toy", "full"), help="(default: %(default)s)")
    p.add_argument("--mode", choices=("STD", "AR_FULL", "AR_FULL_SQ"), default="AR_FULL_SQ",
                   help="encoder depth mixing (default: %(default)s)")
    p.add_argument("--steps", type=int, default=td.steps, help="(default: %(default)s)")
    p.add_argument("--batch-size", type=int, default=td.batch_size, help="(default: %(default)s)")
    p.add_argument("--lr", type=float, default=td.lr, help="peak learning rate (default: %(default)s)")
    p.add_argument("--min-lr", type=float, default=td.min_lr, help="(default: %(default)s)")
    p.add_argument("--weight-decay", type=float, default=td.weight_decay, help="(default: %(default)s)")
    p.add_argument("--warmup", type=float, default=td.warmup, help="warmup fraction of steps (default: %(default)s)")
    p.add_argument("--clip", type=float, default=td.clip, help="gradient-norm clip (default: %(default)s)")
    p.add_argument("--seed", type=int, default=td.seed, help="(default: %(default)s)")
    p.add_argument("--augment", type=_bool, default=False, help="rotation/translation/color jitter (default: %(default)s)")
    p.add_argument("--noise-aug", type=float, default=0.0, help="combined-noise level for training (default: %(default)s)")
    p.add_argument("--dropout", type=float, default=ModelConfig().dropout,
                   help="attention dropout (default: %(default)s)")
    p.add_argument("--word-dropout", type=float, default=td.word_dropout,
                   help="chance of masking each instruction word during training (default: %(default)s)")
    p.add_argument("--freeze-text", type=_bool, default=False, help="(default: %(default)s)")
    _add_loss(p)

    p = sub.add_parser("plan", help="extract a path from probability maps with A*")
    p.add_argument("--maps", required=True, help="map bundle directory")
    p.add_argument("--start", type=_cell, required=True, help="start cell R,C")
    p.add_argument("--goal", type=_cell, help="goal cell R,C (overrides the goal map argmax)")
    p.add_argument("--probabilities", help="directory with path.f32/goal.f32")
    p.add_argument("--checkpoint", help="predict the maps with this model instead")
    p.add_argument("--episode", help="episode JSON supplying the instruction and pose (with --checkpoint)")
    p.add_argument("--out", help="write waypoints JSON here (default: stdout only)")
    p.add_argument("--render", help="also write an overlay PPM of the path here")
    _add_planner(p)

    p = sub.add_parser("eval", help="SR/SPL/TL/NE on a split")
    _add_eval_common(p)
    p.add_argument("--noise-level", type=float, default=0.0, help="combined-noise level (default: %(default)s)")
    p.add_argument("--modalities", default="rgb,occ,sem", help="input channels kept (default: %(default)s)")
    p.add_argument("--out", help="write the report here")
    p.add_argument("--min-sr", type=float, help="exit nonzero when SR falls below this")

    p = sub.add_parser("degrade-eval", help="evaluate under several combined-noise levels")
    _add_eval_common(p)
    p.add_argument("--levels", type=_floats, default=[0.0, 0.05, 0.10, 0.20, 0.30], help="(default: 0,0.05,0.1,0.2,0.3)")
    p.add_argument("--out", help="write the table here")

    p = sub.add_parser("gradcheck", help="finite-difference check of every parameter segment")
    p.add_argument("--preset", default="toy", choices=("toy", "full"), help="(default: %(default)s)")
    p.add_argument("--checkpoint", help="check this state instead of a fresh one")
    p.add_argument("--data", help="dataset to draw the sample from (default: synthetic)")
    p.add_argument("--per-segment", type=int, default=6, help="probes per segment (default: %(default)s)")
    p.add_argument("--tolerance", type=float, default=1e-4, help="(default: %(default)s)")
    p.add_argument("--step", type=float, default=1e-5, help="finite-difference step (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="(default: %(default)s)")
    p.add_argument("--freeze-text", type=_bool, default=False, help="(default: %(default)s)")
    _add_loss(p)

    p = sub.add_parser("orthogonality", help="angles between modality mean features")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="val_seen", choices=("train", "val_seen", "val_unseen"), help="(default: %(default)s)")
    p.add_argument("--out", help="write the matrix as JSON here")

    p = sub.add_parser("render", help="draw predicted and ground-truth routes over the RGB map")
    p.add_argument("--data", required=True)
    p.add_argument("--episode", required=True, help="episode id or JSON path")
    p.add_argument("--checkpoint", help="add the model's prediction")
    p.add_argument("--out", default=_out_default("overlay.ppm"), help="(default: %(default)s)")
    p.add_argument("--probabilities", type=_bool, default=True, help="also write path/goal PGM images (default: %(default)s)")
    _add_planner(p)

    p = sub.add_parser("ablate-modality", help="evaluate with input modalities masked out")
    _add_eval_common(p)
    p.add_argument("--masks", default="rgb+occ+sem,occ+sem,rgb+sem,rgb+occ,sem,occ,rgb",
                   help="comma-separated masks, modalities joined by '+' (default: %(default)s)")
    p.add_argument("--out", help="write the table here")

    p = sub.add_parser("bench-plan", help="time extract_path on random maps")
    p.add_argument("--size", type=int, default=256, help="(default: %(default)s)")
    p.add_argument("--trials", type=int, default=30, help="(default: %(default)s)")
    p.add_argument("--density", type=float, default=0.3, help="obstacle fraction (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="(default: %(default)s)")
    p.add_argument("--max-ms", type=float, help="exit nonzero when the median exceeds this")
    _add_planner(p)
    return ap


# ---- config file ------------------------------------------------------------------


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    cp = configparser.ConfigParser()
    try:
        with open(known.config) as f:
            cp.read_file(f)
    except (OSError, configparser.Error) as exc:
        raise ConfigFileError(f"cannot read config {known.config}: {exc}") from exc
    subs = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for section in cp.sections():
        if section not in subs.choices:
            raise ConfigFileError(f"unknown config section [{section}]")
        sp = subs.choices[section]
        actions = {a.dest: a for a in sp._actions if a.dest not in ("help",) and a.option_strings}
        values = {}
        for key, raw in cp[section].items():
            dest = key.replace("-", "_")
            if dest not in actions:
                raise ConfigFileError(f"unknown key {key!r} in [{section}]")
            act = actions[dest]
            try:
                values[dest] = act.type(raw) if act.type else raw
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise ConfigFileError(f"[{section}] {key}: {exc}") from exc
            if act.choices and values[dest] not in act.choices:
                raise ConfigFileError(f"[{section}] {key}: {raw!r} not in {list(act.choices)}")
            act.required = False
        sp.set_defaults(**values)


# ---- subcommands --------------------------------------------------------------------


def _load_model(path, mode=None):
    from .pathformer.checkpoint import load_checkpoint

    model, _ = load_checkpoint(path)
    return model


def _pairs(args):
    from .mapbuild.dataset import Dataset

    pairs = Dataset(args.data).pairs(args.split)
    return pairs[: args.limit] if args.limit else pairs


def _emit(text: str, out: str | None) -> None:
    sys.stdout.write(text)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def cmd_gen_scenes(args):
    from .mapbuild.dataset import write_scenes
    from .mapbuild.scene import SceneConfig

    cfg = SceneConfig(rooms=args.rooms, objects=args.objects)
    for p in write_scenes(args.out, range(args.seed, args.seed + args.count), cfg):
        print(p)
    return EXIT_OK


def cmd_build_maps(args):
    from .mapbuild.dataset import build_scene_maps

    for s in args.scenes:
        b = build_scene_maps(s, args.out, args.size)
        print(f"{Path(args.out) / 'maps' / Path(s).stem}: s={b.meta.meters_per_pixel:.6f} free={b.occ.mean():.4f}")
    return EXIT_OK


def cmd_gen_dataset(args):
    from .mapbuild.dataset import DatasetConfig, generate_dataset

    cfg = DatasetConfig(seed=args.seed, train_scenes=args.train_scenes, unseen_scenes=args.unseen_scenes,
                        train_per_scene=args.train_per_scene, val_seen_per_scene=args.val_seen_per_scene,
                        val_unseen_per_scene=args.val_unseen_per_scene, map_size=args.size,
                        min_distance=args.min_distance)
    m = generate_dataset(args.out, cfg, log=print)
    print(json.dumps({k: len(v) for k, v in m["splits"].items()}))
    return EXIT_OK


def cmd_train(args):
    from .mapbuild.dataset import Dataset
    from .pathformer.checkpoint import save_checkpoint
    from .pathformer.config import preset
    from .pathformer.train import TrainConfig, TrainingDiverged, train

    pairs = Dataset(args.data).pairs("train")
    mcfg = preset(args.preset).with_(mode=args.mode, seed=args.seed, freeze_text=args.freeze_text,
                                        dropout=args.dropout)
    tcfg = TrainConfig(steps=args.steps, batch_size=args.batch_size, lr=args.lr, min_lr=args.min_lr,
                       weight_decay=args.weight_decay, warmup=args.warmup, clip=args.clip, seed=args.seed,
                       augment=args.augment, noise_level=args.noise_aug, word_dropout=args.word_dropout,
                       weights=_loss(args))
    log_path = Path(args.log or f"{args.out}.log")
    log_path.parent.mkdir(parents=True, exist_ok=True)
    extra = {"train": {k: v for k, v in vars(args).items() if k not in ("func",)}}
    with open(log_path, "w") as log:
        try:
            model, records = train(pairs, mcfg, tcfg, log=lambda line: log.write(line + "\n"))
        except TrainingDiverged as exc:
            from .pathformer.model import PathFormer

            model = PathFormer(mcfg)
            model.load_state_dict(exc.last_good)
            save_checkpoint(args.out, model, extra | {"diverged_at": exc.step})
            print(f"training diverged at step {exc.step}; last good state saved to {args.out}", file=sys.stderr)
            return EXIT_RUNTIME
    save_checkpoint(args.out, model, extra)
    print(f"{args.out}: final loss {records[-1].loss:.6f} after {len(records)} steps; log {log_path}")
    return EXIT_OK


def cmd_plan(args):
    from .mapio import load_bundle, load_probabilities
    from .planner import astar, build_cost_map, extract_path, path_to_waypoints

    bundle = load_bundle(args.maps)
    if args.checkpoint:
        from .mapbuild.episodes import Episode
        from .pathformer.data import predict

        if not args.episode:
            raise ConfigFileError("--checkpoint needs --episode for the instruction and pose")
        ep = Episode.load(args.episode)
        path_map, goal_map = predict(_load_model(args.checkpoint), ep, bundle)
    elif args.probabilities:
        pair = load_probabilities(args.probabilities)
        path_map, goal_map = pair.path, pair.goal
    else:
        # no prediction: uniform path map, goal from --goal
        path_map = np.full(bundle.meta.shape, 0.5)
        goal_map = None
    params = _planner(args)
    if args.goal is not None or goal_map is None:
        if args.goal is None:
            raise ConfigFileError("need --goal, --probabilities or --checkpoint")
        cmap = build_cost_map(path_map, bundle.occ, params.eps, params.c_obs, params.mode)
        path = astar(cmap, args.start, args.goal, params.literal_heuristic)
    else:
        path = extract_path(path_map, goal_map, bundle.occ, args.start, params)
    doc = {
        "cells": [list(c) for c in path.cells],
        "world": [list(w) for w in path_to_waypoints(path, bundle.meta)],
        "cost": path.cost,
        "snapped": path.snapped,
    }
    _emit(json.dumps(doc) + "\n", args.out)
    if args.render:
        from .render import render_overlay, write_overlay

        img = render_overlay(bundle, path.cells, (), path.cells[-1], None)
        Path(args.render).parent.mkdir(parents=True, exist_ok=True)
        keep = goal_map is not None
        write_overlay(args.render, img, path_map if keep else None, goal_map if keep else None)
    return EXIT_OK


def _eval_report(args, pairs, model, noise_level, mask=None):
    from .evaluation import evaluate_run

    if args.agent == "model" and model is None:
        raise ConfigFileError("the model agent needs --checkpoint")
    return evaluate_run(pairs, model, _planner(args), noise_level, args.agent, args.seed, mask, args.mode,
                        args.threshold)


def cmd_eval(args):
    pairs = _pairs(args)
    model = _load_model(args.checkpoint) if args.checkpoint else None
    mask = ChannelMask.from_names(m for m in args.modalities.split(",") if m)
    rep = _eval_report(args, pairs, model, args.noise_level, mask)
    _emit(rep.format(), args.out)
    if args.min_sr is not None and rep.metrics.sr < args.min_sr:
        raise VerifyFailed(f"SR {rep.metrics.sr:.4f} below required {args.min_sr}")
    return EXIT_OK


def cmd_degrade_eval(args):
    pairs = _pairs(args)
    model = _load_model(args.checkpoint) if args.checkpoint else None
    lines = ["level\tSR\tSPL\tTL\tNE"]
    for level in args.levels:
        m = _eval_report(args, pairs, model, level).metrics
        lines.append(f"{level:g}\t{m.sr:.6f}\t{m.spl:.6f}\t{m.tl:.6f}\t{m.ne:.6f}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_ablate(args):
    pairs = _pairs(args)
    model = _load_model(args.checkpoint) if args.checkpoint else None
    lines = ["modalities\tSR\tSPL\tTL\tNE"]
    for spec in args.masks.split(","):
        mask = ChannelMask.from_names(n for n in spec.split("+") if n)
        m = _eval_report(args, pairs, model, 0.0, mask).metrics
        lines.append(f"{spec}\t{m.sr:.6f}\t{m.spl:.6f}\t{m.tl:.6f}\t{m.ne:.6f}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_gradcheck(args):
    from .pathformer.config import preset
    from .pathformer.gradcheck import grad_check, synthetic_pair
    from .pathformer.model import PathFormer

    if args.checkpoint:
        model = _load_model(args.checkpoint)
    else:
        model = PathFormer(preset(args.preset).with_(seed=args.seed, freeze_text=args.freeze_text))
    if args.data:
        from .mapbuild.dataset import Dataset

        pairs = Dataset(args.data).pairs("train")[:2]
    else:
        size = model.config.map_size
        pairs = [synthetic_pair(size, args.seed), synthetic_pair(size, args.seed + 1)]
    t0 = time.perf_counter()
    rep = grad_check(model, pairs, _loss(args), args.per_segment, args.step, args.tolerance, args.seed)
    print(rep.format())
    print(f"elapsed {time.perf_counter() - t0:.1f} s")
    if not rep.passed:
        raise VerifyFailed("segments over tolerance: " + ", ".join(rep.failures))
    return EXIT_OK


def cmd_orthogonality(args):
    from .evaluation import MODALITY_NAMES, modality_features, orthogonality_analysis
    from .mapbuild.dataset import Dataset

    model = _load_model(args.checkpoint)
    feats = modality_features(model, Dataset(args.data).pairs(args.split))
    angles = orthogonality_analysis([feats[k] for k in MODALITY_NAMES])
    lines = ["\t" + "\t".join(MODALITY_NAMES)]
    for name, row in zip(MODALITY_NAMES, angles):
        lines.append(name + "\t" + "\t".join(f"{v:.2f}" for v in row))
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        Path(args.out).write_text(json.dumps({"modalities": list(MODALITY_NAMES), "degrees": angles.tolist()}) + "\n")
    return EXIT_OK


def cmd_render(args):
    from .mapbuild.dataset import Dataset
    from .mapbuild.episodes import Episode
    from .planner import PlannerError, extract_path, localize_goal
    from .render import render_overlay, write_overlay

    ds = Dataset(args.data)
    if Path(args.episode).is_file():
        ep = Episode.load(args.episode)
    else:
        found = [e for s in ("train", "val_seen", "val_unseen") for e in ds.episodes(s) if e.id == args.episode]
        if not found:
            raise FileNotFoundError(f"episode {args.episode!r} not in {args.data}")
        ep = found[0]
    bundle = ds.bundle(ep.scene)
    pred, pred_goal, path_map, goal_map = [], None, None, None
    if args.checkpoint:
        from .pathformer.data import predict

        path_map, goal_map = predict(_load_model(args.checkpoint), ep, bundle)
        pred_goal = localize_goal(goal_map)
        try:
            pred = extract_path(path_map, goal_map, bundle.occ, ep.start, _planner(args)).cells
        except PlannerError as exc:
            print(f"planner failed: {exc}", file=sys.stderr)
    img = render_overlay(bundle, pred, ep.waypoints, pred_goal, ep.goal)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    keep = args.probabilities and path_map is not None
    for p in write_overlay(args.out, img, path_map if keep else None, goal_map if keep else None):
        print(p)
    return EXIT_OK


def bench_plan(size: int = 256, trials: int = 30, density: float = 0.3, seed: int = 0, params=None) -> list[float]:
    """Wall time in ms of ``extract_path`` on random maps; the first (JIT warm-up) call is excluded."""
    from .planner import extract_path

    rng = np.random.default_rng(seed)
    times = []
    for i in range(trials + 1):
        occ = (rng.random((size, size)) >= density).astype(np.uint8)
        path_map = rng.random((size, size))
        goal_map = rng.random((size, size))
        start = (int(rng.integers(size)), int(rng.integers(size)))
        t0 = time.perf_counter()
        extract_path(path_map, goal_map, occ, start, params)
        dt = (time.perf_counter() - t0) * 1000.0
        if i:
            times.append(dt)
    return times


def cmd_bench_plan(args):
    times = bench_plan(args.size, args.trials, args.density, args.seed, _planner(args))
    med = statistics.median(times)
    print(f"size={args.size} trials={args.trials} median_ms={med:.3f} min_ms={min(times):.3f} max_ms={max(times):.3f}")
    if args.max_ms is not None and med > args.max_ms:
        raise VerifyFailed(f"median {med:.3f} ms exceeds {args.max_ms} ms")
    return EXIT_OK


COMMANDS = {
    "gen-scenes": cmd_gen_scenes,
    "build-maps": cmd_build_maps,
    "gen-dataset": cmd_gen_dataset,
    "train": cmd_train,
    "plan": cmd_plan,
    "eval": cmd_eval,
    "degrade-eval": cmd_degrade_eval,
    "gradcheck": cmd_gradcheck,
    "orthogonality": cmd_orthogonality,
    "render": cmd_render,
    "ablate-modality": cmd_ablate,
    "bench-plan": cmd_bench_plan,
}


def dispatch(argv=None) -> int:
    from .mapbuild.dataset import DatasetError
    from .mapbuild.episodes import EpisodeError
    from .pathformer.checkpoint import CheckpointError
    from .pathformer.config import ConfigError
    from .planner import PlannerError

    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except ConfigFileError as exc:
        print(f"topnav: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (ConfigFileError, ConfigError) as exc:
        print(f"topnav: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerifyFailed as exc:
        print(f"topnav: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (DatasetError, EpisodeError, CheckpointError, MapError, FileNotFoundError, OSError) as exc:
        print(f"topnav: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PlannerError as exc:
        print(f"topnav: planner error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
