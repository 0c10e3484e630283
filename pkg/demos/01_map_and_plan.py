"""Build top-down maps for one generated house and plan a route across it.

    python demos/01_map_and_plan.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from topnav.mapbuild.episodes import generate_episode
from topnav.mapbuild.pipeline import build_maps
from topnav.mapbuild.scene import generate_scene
from topnav.mapio import save_bundle
from topnav.planner import extract_path, metric_length, path_to_waypoints
from topnav.render import render_overlay, write_overlay

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

# a procedurally generated floor plan
scene = generate_scene(3)
print(f"scene: {len(scene.rooms)} rooms, {len(scene.objects)} objects")

# explore with the simulated camera, then project RGB / occupancy / semantics
bundle, run = build_maps(scene)
print(f"exploration: {len(run.frames)} frames, coverage {run.coverage[-1]:.3f}")
print(f"map {bundle.meta.height}x{bundle.meta.width}, s = {bundle.meta.meters_per_pixel:.3f} m/px, "
      f"free {bundle.occ.mean():.1%}")
save_bundle(out / "maps", bundle)

# an instruction-following episode on the finished map
ep = generate_episode(scene, bundle, seed=1)
print("instruction:", " ".join(ep.tokens))
print(f"start {ep.start} -> goal {ep.goal}, geodesic {ep.geodesic:.2f} m")

# with no learned prior, a flat path map and a one-hot goal give the shortest route
goal_map = np.zeros(bundle.meta.shape)
goal_map[ep.goal] = 1.0
path = extract_path(np.full(bundle.meta.shape, 0.5), goal_map, bundle.occ, ep.start)
length = metric_length(path.cells, bundle.meta.meters_per_pixel)
print(f"planned {len(path.cells)} cells, {length:.2f} m")
print("first waypoints (m):", [tuple(round(v, 2) for v in w) for w in path_to_waypoints(path, bundle.meta)[:3]])

img = render_overlay(bundle, path.cells, ep.waypoints, path.end, ep.goal)
for p in write_overlay(out / "route.ppm", img):
    print("wrote", p)
