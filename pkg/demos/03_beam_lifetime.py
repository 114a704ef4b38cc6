"""Solving the beam lifetime: exhaustive first-crossing search.

Hold a beam fixed while the user moves; the coupling |h(t)^H f|^2 decays, and
the beam lifetime is the first instant the ratio to the creation-time gain
drops to the threshold (1/2 here, a 3 dB allowance).  The solver walks the
true channel along the trajectory and reports that first crossing, or flags
the window censored when no crossing occurs.  This is the ground truth that
labels the learning dataset in demo 04.

Run:  python demos/03_beam_lifetime.py
"""

import numpy as np

from nfbeam.channel import ArrayGeometry, Scene
from nfbeam.mobility import Region, generate_trajectory
from nfbeam.policy import SolverParams, channel_coherence_time, solve_beam_coherence_time
from nfbeam.util import stream

region = Region(keepout_radius=2.0)
array = ArrayGeometry.half_wavelength(512, 142e9)
search = SolverParams(step=5e-4, horizon=2.0)

print("one pedestrian run with the ratio trace:")
scene = Scene.build(array, region, 2, stream(7, "demo3-scene"))
traj = generate_trajectory("pedestrian", 2.0, 5e-4, region, stream(7, "demo3-traj"))
out = solve_beam_coherence_time(scene, traj, 0.0, search=search, return_ratios=True)
flag = " (censored at the horizon)" if out.censored else ""
print(f"  beam lifetime T_B = {out.tau * 1e3:.1f} ms{flag}")
for frac in (0.25, 0.5, 0.75, 1.0):
    k = max(1, int(frac * out.tau / traj.delta))
    print(f"  ratio at {frac * out.tau * 1e3:6.1f} ms: {out.ratios[k - 1]:.3f}")
print()

print("ten runs per category (shared scenes), against the channel coherence time:")
v_means = {"pedestrian": 1.0, "bicycle": 4.0, "vehicle": 17.5}
for cat, v_mean in v_means.items():
    taus = []
    for i in range(10):
        scene = Scene.build(array, region, 2, stream(7, "demo3", "s", i))
        traj = generate_trajectory(cat, 2.0, 5e-4, region, stream(7, "demo3", "t", i))
        taus.append(solve_beam_coherence_time(scene, traj, 0.0, search=search).tau)
    t_c = channel_coherence_time(array.wavelength, v_mean)
    print(f"  {cat:10s} T_B mean {np.mean(taus) * 1e3:7.1f} ms "
          f"(min {np.min(taus) * 1e3:6.1f}, max {np.max(taus) * 1e3:7.1f})   "
          f"T_C = {t_c * 1e6:6.1f} us   ratio {np.mean(taus) / t_c:7.0f}x")
print("-> beams outlive the channel coherence time by orders of magnitude,")
print("   which is exactly the overhead-saving opportunity\n")

# World files + the CLI spot-check verb.
import subprocess
import tempfile
from pathlib import Path

tmp = Path(tempfile.mkdtemp(prefix="nfbeam-demo3-"))
scene.to_json(tmp / "scene.json")
traj.to_csv(tmp / "traj.csv")
print(f"world exported to {tmp}; the same solve through the CLI:")
cmd = ["nfbeam", "solve-tb", "--scene", str(tmp / "scene.json"),
       "--traj", str(tmp / "traj.csv"), "--t0", "0.0"]
print("  $", " ".join(cmd))
result = subprocess.run(cmd, capture_output=True, text=True)
print(" ", result.stdout.strip() or result.stderr.strip())
