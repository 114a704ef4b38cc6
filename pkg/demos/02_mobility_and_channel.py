"""Gauss-Markov mobility and the multipath channel it drags around.

Three user classes share one autoregressive motion model and differ only in
speed range, memory factor and how sharply the heading may turn per step.
Each trajectory then drives a multipath channel: a line-of-sight path whose
geometry tracks the user, plus static scatterers whose bounce legs stretch
and shrink.  Shadowing is drawn once per path and frozen, so a trajectory
lives in one consistent large-scale fading realization.

Run:  python demos/02_mobility_and_channel.py
"""

import numpy as np

from nfbeam.channel import ArrayGeometry, LinkTrace, Scene
from nfbeam.mobility import CATEGORIES, Region, category_params, generate_trajectory
from nfbeam.util import stream

region = Region(keepout_radius=2.0)
print(f"service area: x in [{region.x_min}, {region.x_max}] m, "
      f"y in [{region.y_min}, {region.y_max}] m, AP keep-out {region.keepout_radius} m\n")

print("category table:")
for cat in CATEGORIES:
    p = category_params(cat)
    print(f"  {cat:10s} alpha={p.alpha}  speeds {p.speed_range} m/s  "
          f"turn window [{p.direction_change_range[0]:.3f}, "
          f"{p.direction_change_range[1]:.3f}] rad")
print()

delta = 5e-4
for cat in CATEGORIES:
    traj = generate_trajectory(cat, 2.0, delta, region, stream(42, "demo2", cat))
    disp = np.hypot(traj.x[-1] - traj.x[0], traj.y[-1] - traj.y[0])
    path_len = np.sum(np.hypot(np.diff(traj.x), np.diff(traj.y)))
    print(f"{cat:10s} 2 s trajectory: mean speed {traj.v.mean():5.2f} m/s, "
          f"path length {path_len:6.2f} m, net displacement {disp:6.2f} m")
print("-> sharp-turn classes wander; the vehicle class covers ground\n")

# Attach a channel and watch a held beam's gain decay for each class.
array = ArrayGeometry.half_wavelength(512, 142e9)
print("gain of a beam frozen at t=0 (ratio to its creation value):")
for cat in CATEGORIES:
    scene = Scene.build(array, region, 2, stream(42, "demo2-scene", cat))
    traj = generate_trajectory(cat, 2.0, delta, region, stream(42, "demo2", cat))
    link = LinkTrace(scene, traj)
    from nfbeam.policy import aim_beam

    beam = aim_beam(link, 0)
    g = link.gain_series(beam.f, 0, len(traj))
    ratio = g / g[0]
    marks = {1: "1 ms", 20: "10 ms", 200: "100 ms", 2000: "1 s", 4000: "2 s"}
    trace = "  ".join(f"{label}:{ratio[k]:.3f}" for k, label in marks.items())
    print(f"  {cat:10s} {trace}")
print("-> faster classes fall below half gain sooner; that first crossing is")
print("   the beam lifetime the rest of this package solves, learns, predicts")
