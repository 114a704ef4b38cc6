"""Secondary release criterion: render every figure kind from a real desk-scale
benchmark run produced through the simulator's public CLI, and fail loudly on
schema violations.

The simulator is exercised strictly through its command-line interface and
file formats (the external surface this package consumes); a miniature
gen-dataset -> train -> benchmark -> freq-sweep pipeline keeps the run under
a minute.
"""

import subprocess
import sys

import pytest

from nfbeam_plots import cli

MICRO_CFG = """
dataset.samples = 50
dataset.traj_duration_s = 3.0
solver.horizon_s = 0.5
run.trajectories = 2
run.duration_s = 0.6
train.epochs = 2
"""


def _run(args):
    proc = subprocess.run([sys.executable, "-m", "nfbeam.cli", *args],
                          capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, f"nfbeam {' '.join(args)} failed:\n{proc.stderr}"


@pytest.fixture(scope="module")
def benchmark_outputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    cfg = out / "micro.cfg"
    cfg.write_text(MICRO_CFG)
    _run(["gen-dataset", "--config", str(cfg), "--seed", "3", "--out", str(out)])
    _run(["train", "--config", str(cfg), "--dataset", str(out / "dataset_manifest.json"),
          "--out", str(out)])
    _run(["benchmark", "--config", str(cfg), "--seed", "4",
          "--model", str(out / "model.json"), "--out", str(out)])
    _run(["freq-sweep", "--config", str(cfg), "--seed", "5",
          "--model", str(out / "model.json"), "--out", str(out)])
    return out


def test_c15_all_three_kinds_from_real_run(benchmark_outputs, tmp_path, capsys):
    out = benchmark_outputs
    rate_csvs = sorted(str(p) for p in out.glob("benchmark_rates_*.csv"))
    assert len(rate_csvs) == 3

    runs = [
        ("rate_timeseries", rate_csvs, tmp_path / "rates.png"),
        ("beam_duration_bars", [str(out / "benchmark_durations.csv")],
         tmp_path / "durations.png"),
        ("freq_sweep_bars", [str(out / "freq_sweep.csv")], tmp_path / "sweep.png"),
    ]
    for kind, inputs, target in runs:
        rc = cli.main(["render", "--kind", kind, "--in", *inputs, "--out", str(target)])
        assert rc == 0, f"{kind} render failed"
        assert target.exists() and target.stat().st_size > 2000

    # the rendered rate figure lists all four policies
    from nfbeam_plots.render import POLICY_LABELS, FigureSpec, build_figure
    import matplotlib.pyplot as plt

    fig = build_figure(FigureSpec("rate_timeseries", rate_csvs, tmp_path / "x.png"))
    try:
        labels = [t.get_text() for ax in fig.axes if ax.get_legend()
                  for t in ax.get_legend().get_texts()]
        for label in POLICY_LABELS.values():
            assert label in labels
    finally:
        plt.close(fig)
    print("\n[C15] PASS — all three figure kinds rendered from a real benchmark run; "
          "legend lists all four policies")


def test_c15_schema_violation_exits_nonzero_naming_column(benchmark_outputs, tmp_path,
                                                          capsys):
    crippled = tmp_path / "freq_sweep.csv"
    lines = (benchmark_outputs / "freq_sweep.csv").read_text().splitlines()
    lines[1] = lines[1].replace("mean_rate_bps_hz", "rate")
    crippled.write_text("\n".join(lines) + "\n")
    rc = cli.main(["render", "--kind", "freq_sweep_bars",
                   "--in", str(crippled), "--out", str(tmp_path / "fig.png")])
    captured = capsys.readouterr()
    assert rc == cli.EXIT_SCHEMA != 0
    assert "mean_rate_bps_hz" in captured.err
    print("\n[C15b] PASS — schema violation exits non-zero and names the missing column")
