"""Reproducible experiment driver: config resolution, benchmarks, manifests.

A run is fully described by (config, master seed): every scene draw,
trajectory and training shuffle comes from a labeled RNG stream, manifests
list every emitted file with its checksum, and no wall-clock state enters any
output, so a rerun is byte-identical.

Config files are plain text with flat dotted keys (`run.trajectories = 10`,
`#` comments, JSON-style values).  Every key has a baked-in default matching
the reference deployment (512-element half-wavelength array at 142 GHz,
30 dBm / -94 dBm link budget, 40 us update overhead, 3 dB gain-ratio
threshold, 50 m x 50 m service area with two scatterers), so an empty config
reproduces it exactly.
"""

from __future__ import annotations

import json
import math
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import fnn, mobility, policy
from .channel import ArrayGeometry, Scene
from .mobility import Region, generate_trajectory
from .util import canonical_json, dbm_to_watts, mean_ci95, sha256_file, sha256_text, stream


class ConfigError(ValueError):
    """Bad config file, unknown key or invalid value."""


DEFAULTS = {
    "scene.n_elements": 512,
    "scene.d_over_lambda": 0.5,
    "scene.f_c_hz": 142e9,
    "scene.num_scatterers": 2,
    "scene.los_exponent": 2.1,
    "scene.nlos_exponent": 3.1,
    "scene.los_shadow_std_db": 2.8,
    "scene.nlos_shadow_std_db": 8.3,
    "scene.keepout_m": 2.0,
    "region.x_min": 0.0,
    "region.x_max": 50.0,
    "region.y_min": -25.0,
    "region.y_max": 25.0,
    "radio.p_t_dbm": 30.0,
    "radio.bandwidth_hz": 20e6,
    "radio.noise_figure_db": 7.0,
    "radio.noise_dbm": -94.0,
    "radio.t_ovh_s": 40e-6,
    "radio.xi": 0.5,
    "run.trajectories": 100,
    "run.duration_s": 10.0,
    "run.delta_s": 5e-4,
    "run.categories": ["pedestrian", "bicycle", "vehicle"],
    "solver.step_s": 5e-4,
    "solver.horizon_s": 2.0,
    "dataset.samples": 250_000,
    "dataset.frequencies_hz": [142e9, 280e9],
    "dataset.traj_duration_s": 10.0,
    "sweep.frequencies_hz": [142e9, 280e9],
    "sweep.trajectories": 0,      # 0 -> reuse run.trajectories
    "train.epochs": 100,
    "train.batch_size": 64,
    "train.lr": 1e-3,
    "train.weight_decay": 1e-5,
    "train.beta_s": 1.0,
    "train.seed": 0,
}


def parse_config_file(path) -> dict:
    """Read `dotted.key = value` lines; values are JSON literals or bare strings."""
    overrides = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, text = (part.strip() for part in line.split("=", 1))
            try:
                value = json.loads(text)
            except json.JSONDecodeError:
                value = text
            overrides[key] = value
    return overrides


def resolve_config(overrides: dict | None = None, scale: float | None = None) -> dict:
    """Defaults + overrides, with unknown keys rejected and --scale applied.

    The scale factor multiplies the Monte-Carlo trajectory count and the
    dataset sample count only.
    """
    cfg = dict(DEFAULTS)
    for key, value in (overrides or {}).items():
        if key not in cfg:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = value
    if scale is not None:
        if scale <= 0:
            raise ConfigError("scale must be positive")
        cfg["run.trajectories"] = max(1, round(cfg["run.trajectories"] * scale))
        cfg["dataset.samples"] = max(10, round(cfg["dataset.samples"] * scale))
        if cfg["sweep.trajectories"]:
            cfg["sweep.trajectories"] = max(1, round(cfg["sweep.trajectories"] * scale))
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    positive = ["scene.n_elements", "scene.d_over_lambda", "scene.f_c_hz",
                "radio.bandwidth_hz", "run.trajectories", "run.duration_s", "run.delta_s",
                "solver.step_s", "solver.horizon_s", "dataset.samples",
                "dataset.traj_duration_s", "train.epochs", "train.batch_size", "train.lr"]
    for key in positive:
        value = cfg[key]
        if not isinstance(value, (int, float)) or value <= 0:
            raise ConfigError(f"{key} must be a positive number, got {value!r}")
    if not 0.0 < cfg["radio.xi"] <= 1.0:
        raise ConfigError("radio.xi must be in (0, 1]")
    if cfg["radio.t_ovh_s"] < 0:
        raise ConfigError("radio.t_ovh_s cannot be negative")
    for cat in cfg["run.categories"]:
        if cat not in mobility.CATEGORIES:
            raise ConfigError(f"unknown mobility category {cat!r}")


def region_from(cfg: dict) -> Region:
    return Region(x_min=cfg["region.x_min"], x_max=cfg["region.x_max"],
                  y_min=cfg["region.y_min"], y_max=cfg["region.y_max"],
                  keepout_radius=cfg["scene.keepout_m"])


def array_from(cfg: dict, f_c: float | None = None) -> ArrayGeometry:
    f_c = cfg["scene.f_c_hz"] if f_c is None else f_c
    lam = 299_792_458.0 / f_c
    return ArrayGeometry(int(cfg["scene.n_elements"]), cfg["scene.d_over_lambda"] * lam, f_c)


def scene_from(cfg: dict, rng: np.random.Generator, f_c: float | None = None) -> Scene:
    return Scene.build(
        array_from(cfg, f_c), region_from(cfg), int(cfg["scene.num_scatterers"]), rng,
        los_exponent=cfg["scene.los_exponent"], nlos_exponent=cfg["scene.nlos_exponent"],
        los_shadow_std_db=cfg["scene.los_shadow_std_db"],
        nlos_shadow_std_db=cfg["scene.nlos_shadow_std_db"])


def policy_config(cfg: dict, kind: str) -> policy.PolicyConfig:
    return policy.PolicyConfig(
        kind=kind, xi=cfg["radio.xi"], t_ovh=cfg["radio.t_ovh_s"],
        p_t_watts=dbm_to_watts(cfg["radio.p_t_dbm"]),
        noise_watts=dbm_to_watts(cfg["radio.noise_dbm"]))


def solver_params(cfg: dict) -> policy.SolverParams:
    return policy.SolverParams(step=cfg["solver.step_s"], horizon=cfg["solver.horizon_s"])


def dataset_config(cfg: dict) -> ds.DatasetBuildConfig:
    return ds.DatasetBuildConfig(
        n_samples=int(cfg["dataset.samples"]),
        categories=tuple(cfg["run.categories"]),
        frequencies_hz=tuple(cfg["dataset.frequencies_hz"]),
        n_elements=int(cfg["scene.n_elements"]),
        num_scatterers=int(cfg["scene.num_scatterers"]),
        region=region_from(cfg),
        traj_duration_s=cfg["dataset.traj_duration_s"],
        delta_s=cfg["run.delta_s"],
        xi=cfg["radio.xi"],
        solver_step_s=cfg["solver.step_s"],
        solver_horizon_s=cfg["solver.horizon_s"])


def code_version() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"],
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except OSError:
        pass
    return "unversioned"


def write_manifest(outdir: Path, command: str, cfg: dict, master_seed: int,
                   outputs: list[Path], extra: dict | None = None) -> Path:
    """Seed-complete run manifest; deliberately carries no wall-clock values
    so identical (config, seed) reruns produce identical manifests."""
    manifest = {
        "format_version": 1,
        "command": command,
        "code_version": code_version(),
        "master_seed": master_seed,
        "config": cfg,
        "config_sha256": sha256_text(canonical_json(cfg)),
        "outputs": [
            {"name": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size}
            for p in sorted(outputs, key=lambda p: p.name)
        ],
    }
    if extra:
        manifest.update(extra)
    path = outdir / f"manifest_{command}.json"
    with open(path, "w") as f:
        f.write(canonical_json(manifest))
        f.write("\n")
    return path


# --------------------------------------------------------------------------
# Benchmark (rate traces per category and policy)
# --------------------------------------------------------------------------

ALL_POLICIES = list(policy.POLICY_KINDS)


@dataclass
class BenchmarkResult:
    f_c: float
    categories: list[str]
    policies: list[str]
    traces: dict            # (category, policy) -> list[RateTrace]
    mean_series: dict       # (category, policy) -> (t, mean, ci95) arrays

    def summary(self) -> dict:
        out = {}
        for category in self.categories:
            per_policy = {}
            for kind in self.policies:
                traces = self.traces[(category, kind)]
                rates = [tr.mean_rate for tr in traces]
                durs = [tr.mean_duration for tr in traces]
                mean_rate, rate_ci = mean_ci95(rates)
                mean_dur, dur_ci = mean_ci95(durs)
                per_policy[kind] = {
                    "mean_rate_bps_hz": mean_rate,
                    "rate_ci95": rate_ci,
                    "mean_beam_duration_s": mean_dur,
                    "duration_ci95": dur_ci,
                    "mean_update_count": float(np.mean([tr.update_count for tr in traces])),
                }
            out[category] = per_policy
        return out


def run_benchmark(cfg: dict, master_seed: int, policies=None, predictor=None,
                  f_c: float | None = None, n_trajectories: int | None = None,
                  duration: float | None = None, progress=None) -> BenchmarkResult:
    """Monte-Carlo policy benchmark at one carrier.

    Each run draws a fresh scene (scatterers + shadowing) and trajectory;
    all policies share them, so cross-policy comparisons are paired.
    """
    policies = list(policies if policies is not None else ALL_POLICIES)
    if "predicted_tb" in policies and predictor is None:
        raise ConfigError("predicted_tb requested but no model supplied")
    f_c = cfg["scene.f_c_hz"] if f_c is None else f_c
    n_traj = int(cfg["run.trajectories"] if n_trajectories is None else n_trajectories)
    duration = cfg["run.duration_s"] if duration is None else duration
    categories = list(cfg["run.categories"])
    region = region_from(cfg)
    search = solver_params(cfg)

    # Stream labels deliberately exclude the carrier: sweeping f_c reuses the
    # same scenes and trajectories, so cross-frequency comparisons are paired.
    traces = {(c, p): [] for c in categories for p in policies}
    for category in categories:
        for i in range(n_traj):
            scene = scene_from(cfg, stream(master_seed, "bench", "scene",
                                           category, i), f_c=f_c)
            traj = generate_trajectory(category, duration, cfg["run.delta_s"], region,
                                       stream(master_seed, "bench", "traj",
                                              category, i))
            for kind in policies:
                trace = policy.simulate_policy(scene, traj, policy_config(cfg, kind),
                                               predictor=predictor, search=search)
                traces[(category, kind)].append(trace)
            if progress is not None:
                progress(category, i, n_traj)

    mean_series = {}
    for key, runs in traces.items():
        stacked = np.stack([tr.rate for tr in runs])
        mean = stacked.mean(axis=0)
        if len(runs) > 1:
            ci = 1.959964 * stacked.std(axis=0, ddof=1) / math.sqrt(len(runs))
        else:
            ci = np.full_like(mean, np.nan)
        mean_series[key] = (runs[0].t, mean, ci)
    return BenchmarkResult(f_c=f_c, categories=categories, policies=policies,
                           traces=traces, mean_series=mean_series)


def write_benchmark_csvs(result: BenchmarkResult, outdir: Path) -> list[Path]:
    """Rate time-series CSV per category plus one beam-duration CSV."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for category in result.categories:
        path = outdir / f"benchmark_rates_{category}.csv"
        with open(path, "w", newline="") as f:
            f.write("# schema=rate_timeseries v1\n")
            f.write("t_s,policy,mean_rate_bps_hz,ci95_bps_hz\n")
            for kind in result.policies:
                t, mean, ci = result.mean_series[(category, kind)]
                for k in range(t.size):
                    f.write(f"{float(t[k])!r},{kind},{float(mean[k])!r},{float(ci[k])!r}\n")
        written.append(path)

    path = outdir / "benchmark_durations.csv"
    summary = result.summary()
    with open(path, "w", newline="") as f:
        f.write("# schema=beam_durations v1\n")
        f.write("category,policy,mean_duration_s,ci95_s,mean_update_count\n")
        for category in result.categories:
            for kind in result.policies:
                row = summary[category][kind]
                f.write(f"{category},{kind},{row['mean_beam_duration_s']!r},"
                        f"{row['duration_ci95']!r},{row['mean_update_count']!r}\n")
    written.append(path)
    return written


def write_summary_json(result: BenchmarkResult, outdir: Path) -> Path:
    path = Path(outdir) / "benchmark_summary.json"
    payload = {"f_c_hz": result.f_c, "categories": result.summary()}
    with open(path, "w") as f:
        f.write(canonical_json(payload))
        f.write("\n")
    return path


# --------------------------------------------------------------------------
# Frequency sweep
# --------------------------------------------------------------------------

def run_freq_sweep(cfg: dict, master_seed: int, predictor, policies=None,
                   n_trajectories: int | None = None, duration: float | None = None,
                   progress=None) -> dict:
    """Mean effective rate per policy per carrier, pooled across categories.

    Runs share RNG stream labels across carriers, so per-run comparisons
    between the two frequencies are paired up to the carrier itself.
    """
    policies = list(policies if policies is not None else ALL_POLICIES)
    n_traj = n_trajectories
    if n_traj is None:
        n_traj = int(cfg["sweep.trajectories"]) or int(cfg["run.trajectories"])
    rows = {}
    for f_c in cfg["sweep.frequencies_hz"]:
        result = run_benchmark(cfg, master_seed, policies=policies, predictor=predictor,
                               f_c=f_c, n_trajectories=n_traj, duration=duration,
                               progress=progress)
        for kind in policies:
            pooled = [tr.mean_rate
                      for category in result.categories
                      for tr in result.traces[(category, kind)]]
            mean, ci = mean_ci95(pooled)
            rows[(kind, f_c)] = {"mean_rate_bps_hz": mean, "ci95_bps_hz": ci,
                                 "per_run": pooled}
    return {"policies": policies, "frequencies": list(cfg["sweep.frequencies_hz"]),
            "rows": rows}


def write_freq_sweep_csv(sweep: dict, outdir: Path) -> Path:
    path = Path(outdir) / "freq_sweep.csv"
    with open(path, "w", newline="") as f:
        f.write("# schema=freq_sweep v1\n")
        f.write("policy,f_c_hz,mean_rate_bps_hz,ci95_bps_hz\n")
        for kind in sweep["policies"]:
            for f_c in sweep["frequencies"]:
                row = sweep["rows"][(kind, f_c)]
                f.write(f"{kind},{f_c!r},{row['mean_rate_bps_hz']!r},"
                        f"{row['ci95_bps_hz']!r}\n")
    return path


# --------------------------------------------------------------------------
# Dataset generation and training wrappers
# --------------------------------------------------------------------------

def generate_dataset(cfg: dict, master_seed: int, outdir, progress=None) -> Path:
    bundle = ds.build_dataset(dataset_config(cfg), master_seed, progress=progress)
    manifest_path = ds.write_dataset(bundle, outdir)
    records = Path(outdir) / ds.RECORDS_NAME
    write_manifest(Path(outdir), "gen-dataset", cfg, master_seed,
                   [records, manifest_path],
                   extra={"censored_fraction": bundle.censored_fraction,
                          "n_samples": int(bundle.labels.size)})
    return manifest_path


def train_model(cfg: dict, dataset_manifest, outdir, seed: int | None = None):
    """Train on a persisted dataset; returns (model path, history path, report)."""
    bundle = ds.load_dataset(dataset_manifest)
    train_cfg = fnn.TrainConfig(
        batch_size=int(cfg["train.batch_size"]), epochs=int(cfg["train.epochs"]),
        beta_s=cfg["train.beta_s"], lr=cfg["train.lr"],
        weight_decay=cfg["train.weight_decay"],
        seed=int(cfg["train.seed"] if seed is None else seed))
    model = fnn.FnnModel.initialized(np.random.default_rng(train_cfg.seed))
    model.normalizer = bundle.normalizer
    model.metadata["floor_s"] = bundle.config["solver_step_s"]
    model.metadata["dataset_config"] = bundle.config
    model.metadata["train_config_sha256"] = sha256_text(canonical_json(train_cfg.to_dict()))

    x_train, y_train = bundle.split_arrays("train")
    x_val, y_val = bundle.split_arrays("val")
    x_test, y_test = bundle.split_arrays("test")
    model, history = fnn.train(model, (x_train, y_train, x_val, y_val), train_cfg)

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    model_path = outdir / "model.json"
    fnn.save_model(model, model_path)
    history_path = outdir / "training_history.csv"
    with open(history_path, "w", newline="") as f:
        f.write("epoch,train_loss,val_loss,lr\n")
        for row in history:
            f.write(f"{row['epoch']},{row['train_loss']!r},{row['val_loss']!r},{row['lr']!r}\n")

    report = {
        "final_train_loss": history[-1]["train_loss"],
        "best_val_loss": min(r["val_loss"] for r in history),
        "test_loss": fnn._eval_loss(model, x_test, y_test, train_cfg.beta_s),
        "epochs": len(history),
    }
    write_manifest(outdir, "train", cfg, train_cfg.seed, [model_path, history_path],
                   extra={"report": report})
    return model_path, history_path, report
