import json

import numpy as np
import pytest

from nfbeam import cli, harness
from nfbeam.harness import ConfigError, parse_config_file, resolve_config

# micro settings shared by the end-to-end harness tests; chosen for runtime,
# not physics fidelity
MICRO = {
    "dataset.samples": 50,
    "dataset.traj_duration_s": 3.0,
    "solver.horizon_s": 0.5,
    "run.trajectories": 2,
    "run.duration_s": 0.6,
    "train.epochs": 2,
}


class TestConfig:
    def test_defaults_reference_values(self):
        cfg = resolve_config()
        assert cfg["scene.n_elements"] == 512
        assert cfg["scene.f_c_hz"] == 142e9
        assert cfg["radio.p_t_dbm"] == 30.0
        assert cfg["radio.noise_dbm"] == -94.0
        assert cfg["radio.t_ovh_s"] == 40e-6
        assert cfg["radio.xi"] == 0.5
        assert cfg["run.trajectories"] == 100
        assert cfg["run.duration_s"] == 10.0
        assert cfg["run.delta_s"] == 5e-4
        assert cfg["dataset.samples"] == 250_000
        assert cfg["train.epochs"] == 100
        assert cfg["train.batch_size"] == 64

    def test_scale_applies_to_counts_only(self):
        cfg = resolve_config({}, scale=0.08)
        assert cfg["dataset.samples"] == 20_000
        assert cfg["run.trajectories"] == 8
        assert cfg["run.duration_s"] == 10.0  # untouched

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config({"scene.n_antennae": 16})

    def test_invalid_value_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config({"radio.xi": 1.5})
        with pytest.raises(ConfigError):
            resolve_config({"run.trajectories": 0})

    def test_parse_file(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text(
            "# comment line\n"
            "scene.n_elements = 64\n"
            "dataset.frequencies_hz = [142e9, 280e9]\n"
            "run.categories = [\"vehicle\"]\n"
            "\n")
        overrides = parse_config_file(path)
        cfg = resolve_config(overrides)
        assert cfg["scene.n_elements"] == 64
        assert cfg["dataset.frequencies_hz"] == [142e9, 280e9]
        assert cfg["run.categories"] == ["vehicle"]

    def test_parse_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("just some words\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)


@pytest.fixture(scope="module")
def micro_run(tmp_path_factory):
    """gen-dataset + train once for the whole module (a few seconds)."""
    out = tmp_path_factory.mktemp("micro")
    cfg = resolve_config(dict(MICRO))
    manifest = harness.generate_dataset(cfg, 11, out)
    model_path, history_path, report = harness.train_model(cfg, manifest, out)
    return cfg, out, manifest, model_path, history_path, report


class TestPipeline:
    def test_dataset_manifest_rerun_identical(self, micro_run, tmp_path):
        cfg, out, manifest, *_ = micro_run
        manifest2 = harness.generate_dataset(cfg, 11, tmp_path)
        assert manifest.read_bytes() == manifest2.read_bytes()
        assert (out / "manifest_gen-dataset.json").read_text() == \
            (tmp_path / "manifest_gen-dataset.json").read_text()

    def test_training_report(self, micro_run):
        *_, report = micro_run
        assert np.isfinite(report["final_train_loss"])
        assert np.isfinite(report["test_loss"])
        assert report["epochs"] == 2

    def test_history_csv_columns(self, micro_run):
        _, _, _, _, history_path, _ = micro_run
        lines = history_path.read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss,lr"
        assert len(lines) == 3

    def test_benchmark_outputs_and_schemas(self, micro_run, tmp_path):
        cfg, *_ , model_path, _, _ = micro_run
        from nfbeam.fnn import load_model
        result = harness.run_benchmark(cfg, 13, predictor=load_model(model_path),
                                       n_trajectories=1)
        paths = harness.write_benchmark_csvs(result, tmp_path)
        summary_path = harness.write_summary_json(result, tmp_path)
        rate_csvs = [p for p in paths if "rates" in p.name]
        assert len(rate_csvs) == 3
        header = rate_csvs[0].read_text().splitlines()
        assert header[0] == "# schema=rate_timeseries v1"
        assert header[1] == "t_s,policy,mean_rate_bps_hz,ci95_bps_hz"
        durations = [p for p in paths if p.name == "benchmark_durations.csv"][0]
        lines = durations.read_text().splitlines()
        assert lines[0] == "# schema=beam_durations v1"
        assert lines[1] == "category,policy,mean_duration_s,ci95_s,mean_update_count"
        assert len(lines) == 2 + 3 * 4
        summary = json.loads(summary_path.read_text())
        assert set(summary["categories"]) == {"pedestrian", "bicycle", "vehicle"}
        for per_policy in summary["categories"].values():
            assert set(per_policy) == {"upper_bound", "statistical_tc",
                                       "numerical_tb", "predicted_tb"}

    def test_freq_sweep_csv(self, micro_run, tmp_path):
        cfg, *_ , model_path, _, _ = micro_run
        from nfbeam.fnn import load_model
        cfg = dict(cfg)
        cfg["sweep.frequencies_hz"] = [142e9, 280e9]
        sweep = harness.run_freq_sweep(cfg, 17, load_model(model_path), n_trajectories=1)
        path = harness.write_freq_sweep_csv(sweep, tmp_path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# schema=freq_sweep v1"
        assert lines[1] == "policy,f_c_hz,mean_rate_bps_hz,ci95_bps_hz"
        assert len(lines) == 2 + 4 * 2


class TestCli:
    def test_unknown_config_key_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("no.such.key = 3\n")
        rc = cli.main(["benchmark", "--config", str(bad), "--out", str(tmp_path)])
        assert rc == cli.EXIT_CONFIG

    def test_missing_dataset_exit_code(self, tmp_path):
        rc = cli.main(["train", "--dataset", str(tmp_path / "nope.json"),
                       "--out", str(tmp_path)])
        assert rc == cli.EXIT_CONFIG

    def test_corrupt_dataset_exit_code(self, micro_run, tmp_path):
        cfg, out, manifest, *_ = micro_run
        records = out / "dataset_records.csv"
        copy_dir = tmp_path / "copy"
        copy_dir.mkdir()
        (copy_dir / "dataset_manifest.json").write_text(manifest.read_text())
        text = records.read_text().splitlines()
        text[1] = text[1].replace(text[1].split(",")[0], "123.0", 1)
        (copy_dir / "dataset_records.csv").write_text("\n".join(text) + "\n")
        rc = cli.main(["train", "--dataset", str(copy_dir / "dataset_manifest.json"),
                       "--out", str(tmp_path)])
        assert rc == cli.EXIT_DATA

    def test_gen_dataset_and_solve_tb_round_trip(self, tmp_path):
        # end-to-end through the CLI: benchmark world files + the solver verb
        from nfbeam.channel import ArrayGeometry, Scene
        from nfbeam.mobility import Region, generate_trajectory
        from nfbeam.util import stream

        region = Region(keepout_radius=2.0)
        scene = Scene.build(ArrayGeometry.half_wavelength(16, 142e9), region, 2,
                            stream(23, "cli-scene"))
        traj = generate_trajectory("vehicle", 0.4, 5e-4, region, stream(23, "cli-traj"))
        scene.to_json(tmp_path / "scene.json")
        traj.to_csv(tmp_path / "traj.csv")
        rc = cli.main(["solve-tb", "--scene", str(tmp_path / "scene.json"),
                       "--traj", str(tmp_path / "traj.csv"),
                       "--t0", "0.0", "--horizon", "0.3", "--fine", "2"])
        assert rc == cli.EXIT_OK

    def test_solve_tb_matches_library(self, tmp_path, capsys):
        from nfbeam.channel import ArrayGeometry, Scene
        from nfbeam.mobility import Region, generate_trajectory
        from nfbeam.policy import SolverParams, solve_beam_coherence_time
        from nfbeam.util import stream

        region = Region(keepout_radius=2.0)
        scene = Scene.build(ArrayGeometry.half_wavelength(16, 142e9), region, 2,
                            stream(29, "cli2"))
        traj = generate_trajectory("vehicle", 0.4, 5e-4, region, stream(29, "cli2t"))
        scene.to_json(tmp_path / "scene.json")
        traj.to_csv(tmp_path / "traj.csv")
        rc = cli.main(["solve-tb", "--scene", str(tmp_path / "scene.json"),
                       "--traj", str(tmp_path / "traj.csv"), "--horizon", "0.3"])
        assert rc == cli.EXIT_OK
        printed = capsys.readouterr().out
        expected = solve_beam_coherence_time(scene, traj, 0.0,
                                             search=SolverParams(step=5e-4, horizon=0.3))
        assert f"{expected.tau:.6f}" in printed
