"""Labeled beam-lifetime dataset: features, noise injection, splits, files.

Each sample maps a 12-entry kinematic/system feature vector to the numerically
solved beam lifetime at one beam-update instant.  The layout is fixed:

    0: v(t)                         speed, m/s
    1: r0(t)      2: sin t0(t)      3: cos t0(t)      newest snapshot
    4: r0(t-T')   5: sin t0(t-T')   6: cos t0(t-T')   one lifetime back
    7: r0(t-T'-T'') 8: sin ...      9: cos ...        two lifetimes back
    10: carrier frequency, Hz       11: array element count

where T' and T'' are the two beam lifetimes immediately preceding t on the
same trajectory, so deployment-time inputs and training inputs are built the
same way.  Samples are drawn beam-period by beam-period (lifetimes from the
exhaustive solver), contaminated with per-sample Gaussian noise on distances,
angles and speed, and split 80/10/10 at the trajectory level.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import ArrayGeometry, LinkTrace, Scene
from .mobility import Region, Trajectory, generate_trajectory
from .policy import SolverParams, _first_crossing, aim_beam
from .util import canonical_json, sha256_file, sha256_text, stream

FEATURE_NAMES = (
    "v", "r0_now", "sin_now", "cos_now",
    "r0_prev", "sin_prev", "cos_prev",
    "r0_prev2", "sin_prev2", "cos_prev2",
    "f_c", "n_elements",
)

NUM_FEATURES = 12

DATASET_FORMAT = 1


class DataValidationError(ValueError):
    """A dataset file or its manifest failed an integrity check."""


def _snapshot_entries(traj: Trajectory, k: int) -> tuple[float, float, float]:
    r0 = math.hypot(traj.x[k], traj.y[k])
    theta0 = math.atan2(traj.y[k], traj.x[k])
    return r0, math.sin(theta0), math.cos(theta0)


def extract_features(traj: Trajectory, t: float, tb_prev: float, tb_prev2: float,
                     f_c: float, n_elements: int) -> np.ndarray:
    """Assemble the 12-entry feature vector for a beam update at time t.

    Snapshot times t, t-T' and t-T'-T'' snap to the nearest trajectory grid
    point; the speed is read at t only.
    """
    t0 = float(traj.t[0])
    if t - tb_prev - tb_prev2 < t0 - traj.delta / 2:
        raise ValueError("lookback snapshot precedes the trajectory start")
    k_now = traj.index_at(t)
    k_prev = traj.index_at(t - tb_prev)
    k_prev2 = traj.index_at(t - tb_prev - tb_prev2)
    fv = np.empty(NUM_FEATURES)
    fv[0] = traj.v[k_now]
    fv[1:4] = _snapshot_entries(traj, k_now)
    fv[4:7] = _snapshot_entries(traj, k_prev)
    fv[7:10] = _snapshot_entries(traj, k_prev2)
    fv[10] = f_c
    fv[11] = n_elements
    return fv


def features_from_link(link: LinkTrace, k: int, tb_prev: float, tb_prev2: float) -> np.ndarray:
    """Same layout as extract_features, read off a prepared LinkTrace."""
    traj = link.traj
    scene = link.scene
    k_prev = traj.index_at(traj.t[k] - tb_prev)
    k_prev2 = traj.index_at(traj.t[k] - tb_prev - tb_prev2)
    fv = np.empty(NUM_FEATURES)
    fv[0] = traj.v[k]
    for slot, idx in ((1, k), (4, k_prev), (7, k_prev2)):
        fv[slot] = link.r0[idx]
        fv[slot + 1] = math.sin(link.theta0[idx])
        fv[slot + 2] = math.cos(link.theta0[idx])
    fv[10] = scene.array.carrier_frequency
    fv[11] = scene.array.num_elements
    return fv


def inject_noise(fv: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Per-sample measurement noise on distances, angles and speed.

    Noise scales are themselves drawn per sample: sigma_r ~ U[0,1] m,
    sigma_theta ~ U[0,5 deg], sigma_v ~ U[0,1] m/s.  Angle noise perturbs the
    recovered angle and re-expands sin/cos, so the trig identity survives.
    Carrier frequency and element count are never touched.
    """
    out = np.array(fv, dtype=float)
    sigma_r = rng.uniform(0.0, 1.0)
    sigma_theta = rng.uniform(0.0, math.radians(5.0))
    sigma_v = rng.uniform(0.0, 1.0)
    out[0] += sigma_v * rng.standard_normal()
    for slot in (1, 4, 7):
        out[slot] += sigma_r * rng.standard_normal()
        theta = math.atan2(out[slot + 1], out[slot + 2])
        theta += sigma_theta * rng.standard_normal()
        out[slot + 1] = math.sin(theta)
        out[slot + 2] = math.cos(theta)
    return out


@dataclass
class Sample:
    features: np.ndarray   # raw (noise-injected) layout above
    label: float           # beam lifetime, seconds
    traj_id: int
    censored: bool


@dataclass
class Normalizer:
    """Z-score for inputs; log-compressed [0, 1] scaling for the label.

    Labels span three decades (sub-millisecond vehicle lifetimes up to
    multi-second censored holds).  Dividing by the training max squashes the
    bulk of them below one optimizer step at the reference learning rate and
    training collapses, so the label is encoded as

        t = log(label / floor) / log(max_train / floor)

    which is nonnegative (ReLU-head compatible: labels never undercut the
    solver grid floor), maps the training maximum to exactly 1, inverts
    exactly, and makes absolute training error correspond to relative
    lifetime error, which is what the downstream rate metric rewards.
    """

    mean: np.ndarray
    std: np.ndarray
    label_floor: float
    label_scale: float  # log(max_train / floor); 1.0 for degenerate constant labels

    @classmethod
    def fit(cls, features: np.ndarray, labels: np.ndarray,
            label_floor: float = 5e-4) -> "Normalizer":
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        # Constant features (e.g. a single array size) carry no information;
        # unit std maps them to exactly zero instead of dividing by zero.
        std = np.where(std < 1e-12, 1.0, std)
        if np.min(labels) <= 0.0:
            raise ValueError("labels must be positive to fit the label scaler")
        scale = math.log(float(np.max(labels)) / label_floor)
        if scale <= 0.0:
            scale = 1.0
        return cls(mean=mean, std=std, label_floor=label_floor, label_scale=scale)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.mean) / self.std

    def transform_label(self, label):
        y = np.maximum(np.asarray(label, dtype=float), self.label_floor)
        return np.log(y / self.label_floor) / self.label_scale

    def inverse_label(self, y):
        return self.label_floor * np.exp(np.asarray(y, dtype=float) * self.label_scale)


@dataclass
class TrajectoryRecipe:
    """Everything needed to regenerate one labeled trajectory deterministically."""

    traj_id: int
    category: str
    f_c: float
    scene_stream: tuple
    traj_stream: tuple


@dataclass
class DatasetBundle:
    features: np.ndarray       # (n, 12) raw noisy features
    labels: np.ndarray         # (n,)
    traj_ids: np.ndarray       # (n,)
    censored: np.ndarray       # (n,) bool
    split: dict                # name -> index array
    normalizer: Normalizer
    config: dict
    master_seed: int
    recipes: list[TrajectoryRecipe]

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.censored))

    def split_arrays(self, name: str, normalized: bool = True):
        idx = self.split[name]
        x = self.features[idx]
        y = self.labels[idx]
        if normalized:
            x = self.normalizer.transform(x)
            y = self.normalizer.transform_label(y)
        return x, y


@dataclass
class DatasetBuildConfig:
    n_samples: int = 250_000
    categories: tuple = ("pedestrian", "bicycle", "vehicle")
    frequencies_hz: tuple = (142e9, 280e9)
    n_elements: int = 512
    num_scatterers: int = 2
    region: Region = Region(keepout_radius=2.0)
    traj_duration_s: float = 10.0
    delta_s: float = 5e-4
    xi: float = 0.5
    solver_step_s: float = 5e-4
    solver_horizon_s: float = 2.0

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "categories": list(self.categories),
            "frequencies_hz": list(self.frequencies_hz),
            "n_elements": self.n_elements,
            "num_scatterers": self.num_scatterers,
            "region": [self.region.x_min, self.region.x_max,
                       self.region.y_min, self.region.y_max, self.region.keepout_radius],
            "traj_duration_s": self.traj_duration_s,
            "delta_s": self.delta_s,
            "xi": self.xi,
            "solver_step_s": self.solver_step_s,
            "solver_horizon_s": self.solver_horizon_s,
        }


def label_trajectory(scene: Scene, traj: Trajectory, xi: float,
                     search: SolverParams) -> list[tuple[float, float, bool]]:
    """Walk one trajectory beam-period by beam-period.

    Returns (start_time, lifetime, censored) per period.  Stops once a full
    solver horizon no longer fits before the trajectory end, so labels are
    never truncated.
    """
    link = LinkTrace(scene, traj)
    stride = int(round(search.step / traj.delta))
    n_h = int(round(search.horizon / traj.delta))
    last = len(traj) - 1
    periods = []
    k = 0
    while k + n_h <= last:
        beam = aim_beam(link, k)
        steps, censored, _, _ = _first_crossing(link, beam, k, xi, stride, n_h)
        periods.append((float(traj.t[k]), steps * traj.delta, censored))
        k += steps
    return periods


def _samples_from_periods(traj: Trajectory, periods, f_c: float, n_elements: int,
                          traj_id: int, noise_rng: np.random.Generator) -> list[Sample]:
    """Periods 3+ yield samples: the two preceding lifetimes are the lookback."""
    out = []
    for i in range(2, len(periods)):
        t, lifetime, censored = periods[i]
        tb_prev = periods[i - 1][1]
        tb_prev2 = periods[i - 2][1]
        fv = extract_features(traj, t, tb_prev, tb_prev2, f_c, n_elements)
        fv = inject_noise(fv, noise_rng)
        out.append(Sample(features=fv, label=lifetime, traj_id=traj_id, censored=censored))
    return out


def _split_by_trajectory(samples: list[Sample], n_total: int,
                         rng: np.random.Generator) -> tuple[list[Sample], dict]:
    """Exact 80/10/10 sample counts with trajectory-disjoint assignment.

    Floor rule: n_test = floor(0.1 n), n_val = floor(0.1 n), train the rest.
    Whole trajectories fill test, then validation, then train, in seeded
    random order; boundary trajectories are trimmed (their excess samples are
    dropped from the dataset entirely, never leaked across splits).
    """
    n_test = n_total // 10
    n_val = n_total // 10
    n_train = n_total - n_test - n_val

    by_traj: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_traj.setdefault(s.traj_id, []).append(i)
    traj_order = list(by_traj)
    rng.shuffle(traj_order)

    quotas = [("test", n_test), ("val", n_val), ("train", n_train)]
    kept: list[Sample] = []
    split: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    it = iter(traj_order)
    for name, quota in quotas:
        filled = 0
        while filled < quota:
            try:
                tid = next(it)
            except StopIteration:
                raise DataValidationError(
                    f"not enough samples to fill the {name} split") from None
            take = min(quota - filled, len(by_traj[tid]))
            for i in by_traj[tid][:take]:
                split[name].append(len(kept))
                kept.append(samples[i])
            filled += take
    return kept, {k: np.asarray(v, dtype=int) for k, v in split.items()}


def build_dataset(config: DatasetBuildConfig, master_seed: int,
                  progress=None) -> DatasetBundle:
    """Generate trajectories round-robin over (category x frequency) cells,
    label them with the numerical solver and assemble the split dataset.

    Fully deterministic in master_seed: every scene, trajectory and noise draw
    comes from a stable labeled stream.
    """
    search = SolverParams(step=config.solver_step_s, horizon=config.solver_horizon_s)
    cells = [(c, f) for f in config.frequencies_hz for c in config.categories]
    samples: list[Sample] = []
    recipes: list[TrajectoryRecipe] = []
    traj_id = 0
    round_idx = 0
    kept = split = None
    while kept is None:
        for category, f_c in cells:
            scene_labels = ("dataset", "scene", category, int(f_c), round_idx)
            traj_labels = ("dataset", "traj", category, int(f_c), round_idx)
            array = ArrayGeometry.half_wavelength(config.n_elements, f_c)
            scene = Scene.build(array, config.region, config.num_scatterers,
                                stream(master_seed, *scene_labels))
            traj = generate_trajectory(category, config.traj_duration_s, config.delta_s,
                                       config.region, stream(master_seed, *traj_labels))
            periods = label_trajectory(scene, traj, config.xi, search)
            noise_rng = stream(master_seed, "dataset", "noise", traj_id)
            samples.extend(_samples_from_periods(
                traj, periods, f_c, config.n_elements, traj_id, noise_rng))
            recipes.append(TrajectoryRecipe(
                traj_id=traj_id, category=category, f_c=f_c,
                scene_stream=scene_labels, traj_stream=traj_labels))
            traj_id += 1
        round_idx += 1
        if progress is not None:
            progress(len(samples), config.n_samples)
        if round_idx > 10_000:
            raise DataValidationError("trajectories yield no samples; check the config")
        if len(samples) >= config.n_samples:
            # Whole-trajectory split assignment trims boundary trajectories,
            # so it can need more raw samples than the target; keep generating
            # until it fills.  The split rng restarts each attempt, which
            # keeps the outcome a pure function of the master seed.
            try:
                kept, split = _split_by_trajectory(samples, config.n_samples,
                                                   stream(master_seed, "dataset", "split"))
            except DataValidationError:
                kept = split = None
    features = np.stack([s.features for s in kept])
    labels = np.asarray([s.label for s in kept])
    traj_ids = np.asarray([s.traj_id for s in kept], dtype=int)
    censored = np.asarray([s.censored for s in kept], dtype=bool)
    normalizer = Normalizer.fit(features[split["train"]], labels[split["train"]],
                                label_floor=config.solver_step_s)
    kept_ids = set(traj_ids.tolist())
    return DatasetBundle(
        features=features, labels=labels, traj_ids=traj_ids, censored=censored,
        split=split, normalizer=normalizer, config=config.to_dict(),
        master_seed=master_seed, recipes=[r for r in recipes if r.traj_id in kept_ids])


RECORDS_NAME = "dataset_records.csv"
MANIFEST_NAME = "dataset_manifest.json"


def write_dataset(bundle: DatasetBundle, outdir) -> Path:
    """Persist records CSV + manifest JSON; returns the manifest path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    records = outdir / RECORDS_NAME
    with open(records, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(list(FEATURE_NAMES) + ["label_s", "traj_id", "censored"])
        for i in range(bundle.labels.size):
            row = [repr(float(v)) for v in bundle.features[i]]
            row += [repr(float(bundle.labels[i])), int(bundle.traj_ids[i]),
                    int(bundle.censored[i])]
            w.writerow(row)

    manifest = {
        "format_version": DATASET_FORMAT,
        "master_seed": bundle.master_seed,
        "config": bundle.config,
        "records_file": RECORDS_NAME,
        "records_sha256": sha256_file(records),
        "n_samples": int(bundle.labels.size),
        "censored_fraction": bundle.censored_fraction,
        "split": {k: v.tolist() for k, v in bundle.split.items()},
        "split_rule": "n_test=floor(n/10), n_val=floor(n/10), train=rest; "
                      "whole trajectories per split, boundary trajectories trimmed",
        "normalizer": {
            "mean": bundle.normalizer.mean.tolist(),
            "std": bundle.normalizer.std.tolist(),
            "label_floor": bundle.normalizer.label_floor,
            "label_scale": bundle.normalizer.label_scale,
        },
        "trajectories": [
            {"traj_id": r.traj_id, "category": r.category, "f_c": r.f_c,
             "scene_stream": list(r.scene_stream), "traj_stream": list(r.traj_stream)}
            for r in bundle.recipes
        ],
    }
    manifest_path = outdir / MANIFEST_NAME
    with open(manifest_path, "w") as f:
        f.write(canonical_json(manifest))
        f.write("\n")
    return manifest_path


def load_dataset(manifest_path) -> DatasetBundle:
    """Load and integrity-check a persisted dataset."""
    manifest_path = Path(manifest_path)
    with open(manifest_path) as f:
        manifest = json.load(f)
    if manifest.get("format_version") != DATASET_FORMAT:
        raise DataValidationError(f"unsupported dataset format {manifest.get('format_version')}")
    records = manifest_path.parent / manifest["records_file"]
    if sha256_file(records) != manifest["records_sha256"]:
        raise DataValidationError(f"{records}: checksum mismatch against the manifest")

    with open(records, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header[:NUM_FEATURES] != list(FEATURE_NAMES):
            raise DataValidationError(f"{records}: unexpected feature columns")
        rows = list(reader)
    data = np.asarray(rows, dtype=float)
    if data.shape[0] != manifest["n_samples"]:
        raise DataValidationError(f"{records}: row count differs from the manifest")

    normalizer = Normalizer(
        mean=np.asarray(manifest["normalizer"]["mean"], dtype=float),
        std=np.asarray(manifest["normalizer"]["std"], dtype=float),
        label_floor=float(manifest["normalizer"]["label_floor"]),
        label_scale=float(manifest["normalizer"]["label_scale"]),
    )
    recipes = [TrajectoryRecipe(
        traj_id=rec["traj_id"], category=rec["category"], f_c=rec["f_c"],
        scene_stream=tuple(rec["scene_stream"]), traj_stream=tuple(rec["traj_stream"]))
        for rec in manifest["trajectories"]]
    return DatasetBundle(
        features=data[:, :NUM_FEATURES],
        labels=data[:, NUM_FEATURES],
        traj_ids=data[:, NUM_FEATURES + 1].astype(int),
        censored=data[:, NUM_FEATURES + 2].astype(bool),
        split={k: np.asarray(v, dtype=int) for k, v in manifest["split"].items()},
        normalizer=normalizer,
        config=manifest["config"],
        master_seed=manifest["master_seed"],
        recipes=recipes,
    )
