"""Generate a small dataset, train the toy model briefly, then evaluate it.

    python demos/02_train_and_evaluate.py [out_dir] [steps]

The default run is short enough for a laptop and will not reach a high
success rate; use the CLI `train` subcommand with the full dataset for that.
"""

import sys
from pathlib import Path

from topnav.evaluation import MODALITY_NAMES, evaluate_run, modality_features, orthogonality_analysis
from topnav.gridmap import ChannelMask
from topnav.mapbuild.dataset import Dataset, DatasetConfig, generate_dataset
from topnav.noise import LEVELS
from topnav.pathformer.checkpoint import save_checkpoint
from topnav.pathformer.config import preset
from topnav.pathformer.data import predict
from topnav.pathformer.train import TrainConfig, train
from topnav.planner import extract_path, localize_goal
from topnav.render import render_overlay, write_overlay

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
steps = int(sys.argv[2]) if len(sys.argv) > 2 else 300

cfg = DatasetConfig(seed=40, train_scenes=2, unseen_scenes=1, train_per_scene=10, val_seen_per_scene=3,
                    val_unseen_per_scene=3)
if not (out / "data" / "manifest.json").exists():
    generate_dataset(out / "data", cfg, log=print)
ds = Dataset(out / "data")
print({s: len(ds.episodes(s)) for s in ("train", "val_seen", "val_unseen")})



def every_50(line):
    if int(line.split()[0][len("step="):]) % 50 == 0:
        print(line)


model, records = train(ds.pairs("train"), preset("toy"), TrainConfig(steps=steps, lr=1e-3, augment=True), log=every_50)
save_checkpoint(out / "demo.ckpt", model)

for split in ("train", "val_seen", "val_unseen"):
    m = evaluate_run(ds.pairs(split), model).metrics
    print(f"{split:<10} SR {m.sr:.2f}  SPL {m.spl:.2f}  NE {m.ne:.2f} m")
o = evaluate_run(ds.pairs("val_seen"), agent="oracle").metrics
print(f"oracle     SR {o.sr:.2f}  SPL {o.spl:.2f}  NE {o.ne:.2f} m")

# combined map noise
pairs = ds.pairs("val_seen")
print("noise  " + "  ".join(f"{lv:>4.0%}" for lv in LEVELS))
print("SR     " + "  ".join(f"{evaluate_run(pairs, model, noise_level=lv).metrics.sr:>4.2f}" for lv in LEVELS))

# drop one input modality at a time
for names in (("rgb", "occ", "sem"), ("occ", "sem"), ("rgb", "sem"), ("rgb", "occ")):
    m = evaluate_run(pairs, model, mask=ChannelMask.from_names(names)).metrics
    print(f"{'+'.join(names):<12} SR {m.sr:.2f}")

feats = modality_features(model, pairs)
ang = orthogonality_analysis([feats[k] for k in MODALITY_NAMES])
print("angles (deg) between", ", ".join(MODALITY_NAMES))
for name, row in zip(MODALITY_NAMES, ang):
    print(f"  {name:<12}", " ".join(f"{v:6.1f}" for v in row))

# predicted vs ground-truth route for one episode
ep, bundle = pairs[0]
path_map, goal_map = predict(model, ep, bundle)
path = extract_path(path_map, goal_map, bundle.occ, ep.start)
img = render_overlay(bundle, path.cells, ep.waypoints, localize_goal(goal_map), ep.goal)
for p in write_overlay(out / f"{ep.id}.ppm", img, path_map, goal_map):
    print("wrote", p)
