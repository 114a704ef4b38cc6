"""End to end at desk scale: dataset, training, and the policy benchmark.

Four beam-update policies compete on effective rate (spectral efficiency
discounted by a 40 us re-steering overhead per update):

  upper_bound     re-aim every channel coherence time, overhead waived
  statistical_tc  re-aim every channel coherence time, overhead paid
  numerical_tb    hold each beam until its measured gain-ratio crossing
  predicted_tb    hold for a learned prediction of that crossing

The miniature run below (a few hundred labeled samples, a couple of epochs)
finishes in about a minute and shows the solver-side structure of the full
result: T_C-paced updates bleed overhead as mobility grows (vehicles transmit
nothing) while measured-lifetime updates track the upper bound.  The learned
column is undertrained at this scale — at the acceptance scale (20k samples,
30 epochs) it reaches 95-103% of the numerical policy.  Scale up through the
CLI for the real experiment:

  nfbeam gen-dataset --scale 0.1 --seed 1 --out out/
  nfbeam train --dataset out/dataset_manifest.json --epochs 30 --out out/
  nfbeam benchmark --model out/model.json --scale 0.1 --seed 2 --out out/
  nfbeam freq-sweep --model out/model.json --scale 0.05 --seed 3 --out out/

Run:  python demos/04_policy_benchmark.py
"""

import tempfile
import time
from pathlib import Path

from nfbeam import fnn, harness

t0 = time.time()
out = Path(tempfile.mkdtemp(prefix="nfbeam-demo4-"))
cfg = harness.resolve_config({
    "dataset.samples": 400,
    "dataset.traj_duration_s": 4.0,
    "solver.horizon_s": 1.0,
    "run.trajectories": 3,
    "run.duration_s": 1.5,
    "train.epochs": 4,
})

print("1) labeling a miniature dataset with the numerical solver ...")
manifest = harness.generate_dataset(cfg, 5, out)
print(f"   wrote {manifest.name}  ({time.time() - t0:.0f}s)")

print("2) training the lifetime predictor ...")
model_path, _, report = harness.train_model(cfg, manifest, out)
print(f"   best val loss {report['best_val_loss']:.5f}, "
      f"test loss {report['test_loss']:.5f}  ({time.time() - t0:.0f}s)")

print("3) benchmarking the four policies on fresh trajectories ...")
result = harness.run_benchmark(cfg, 17, predictor=fnn.load_model(model_path))
summary = result.summary()
print(f"   ({time.time() - t0:.0f}s)\n")

header = f"{'category':12s}" + "".join(f"{p:>16s}" for p in result.policies)
print("mean effective rate, bit/s/Hz")
print(header)
for cat in result.categories:
    row = f"{cat:12s}"
    for kind in result.policies:
        row += f"{summary[cat][kind]['mean_rate_bps_hz']:16.3f}"
    print(row)

print("\nmean beam duration, ms")
print(header)
for cat in result.categories:
    row = f"{cat:12s}"
    for kind in result.policies:
        row += f"{summary[cat][kind]['mean_beam_duration_s'] * 1e3:16.3f}"
    print(row)

print("\n-> statistical_tc pays 40 us every ~0.5 ms for pedestrians (7.6% tax),")
print("   and every 30 us for vehicles — less time than the overhead itself,")
print("   so the vehicle row transmits nothing.  Lifetime-paced updates hold")
print("   beams thousands of times longer at a few percent of rate cost.")
