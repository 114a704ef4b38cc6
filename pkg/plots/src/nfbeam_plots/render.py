"""Figure construction for the three benchmark figure kinds."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # file output only, keeps rendering deterministic

import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, as_float, read_csv

KINDS = ("rate_timeseries", "beam_duration_bars", "freq_sweep_bars")

POLICY_ORDER = ("upper_bound", "statistical_tc", "numerical_tb", "predicted_tb")
POLICY_LABELS = {
    "upper_bound": "upper bound (no overhead)",
    "statistical_tc": "statistical T_C",
    "numerical_tb": "numerical T_B",
    "predicted_tb": "predicted T_B",
}
POLICY_COLORS = {
    "upper_bound": "#444444",
    "statistical_tc": "#d62728",
    "numerical_tb": "#1f77b4",
    "predicted_tb": "#2ca02c",
}


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: Path
    styling: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)


def _policies_in(rows):
    seen = []
    for row in rows:
        if row["policy"] not in seen:
            seen.append(row["policy"])
    return sorted(seen, key=lambda p: POLICY_ORDER.index(p) if p in POLICY_ORDER else 99)


def _style(policy):
    return {"label": POLICY_LABELS.get(policy, policy),
            "color": POLICY_COLORS.get(policy, None)}


def build_figure(spec: FigureSpec):
    """Validate the inputs and assemble the matplotlib Figure."""
    builder = {
        "rate_timeseries": _build_rate_timeseries,
        "beam_duration_bars": _build_beam_duration_bars,
        "freq_sweep_bars": _build_freq_sweep_bars,
    }[spec.kind]
    return builder(spec)


def _build_rate_timeseries(spec: FigureSpec):
    """One stacked panel per input CSV (typically one per mobility class)."""
    panels = [(path, read_csv(path, "rate_timeseries")) for path in spec.inputs]
    fig, axes = plt.subplots(len(panels), 1, figsize=(7.0, 2.6 * len(panels)),
                             squeeze=False, sharex=True)
    for ax, (path, rows) in zip(axes[:, 0], panels):
        for policy in _policies_in(rows):
            sub = [r for r in rows if r["policy"] == policy]
            t = np.array([as_float(r, "t_s", path) for r in sub])
            rate = np.array([as_float(r, "mean_rate_bps_hz", path) for r in sub])
            ci = np.array([float(r["ci95_bps_hz"]) if r["ci95_bps_hz"] not in ("nan", "")
                           else np.nan for r in sub])
            ax.plot(t, rate, linewidth=1.4, **_style(policy))
            if np.isfinite(ci).all():
                ax.fill_between(t, rate - ci, rate + ci,
                                color=POLICY_COLORS.get(policy), alpha=0.15, linewidth=0)
        title = path.stem.replace("benchmark_rates_", "")
        ax.set_title(title, fontsize=10)
        ax.set_ylabel("effective rate (bit/s/Hz)")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8, loc="lower right")
    axes[-1, 0].set_xlabel("time (s)")
    fig.tight_layout()
    return fig


def _build_beam_duration_bars(spec: FigureSpec):
    if len(spec.inputs) != 1:
        raise ValueError("beam_duration_bars expects exactly one input CSV")
    path = spec.inputs[0]
    rows = read_csv(path, "beam_durations")
    categories = []
    for row in rows:
        if row["category"] not in categories:
            categories.append(row["category"])
    policies = _policies_in(rows)
    lookup = {(r["category"], r["policy"]): as_float(r, "mean_duration_s", path)
              for r in rows}

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    x = np.arange(len(categories))
    width = 0.8 / len(policies)
    for j, policy in enumerate(policies):
        vals = [lookup.get((c, policy), np.nan) * 1e3 for c in categories]
        ax.bar(x + (j - (len(policies) - 1) / 2) * width, vals, width, **_style(policy))
    ax.set_yscale("log")
    ax.set_xticks(x, categories)
    ax.set_ylabel("mean beam duration (ms, log scale)")
    ax.grid(alpha=0.3, axis="y")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _build_freq_sweep_bars(spec: FigureSpec):
    if len(spec.inputs) != 1:
        raise ValueError("freq_sweep_bars expects exactly one input CSV")
    path = spec.inputs[0]
    rows = read_csv(path, "freq_sweep")
    freqs = sorted({as_float(r, "f_c_hz", path) for r in rows})
    policies = _policies_in(rows)
    mean = {(r["policy"], as_float(r, "f_c_hz", path)):
            as_float(r, "mean_rate_bps_hz", path) for r in rows}
    ci = {(r["policy"], as_float(r, "f_c_hz", path)):
          float(r["ci95_bps_hz"]) if r["ci95_bps_hz"] not in ("nan", "") else 0.0
          for r in rows}

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    x = np.arange(len(freqs))
    width = 0.8 / len(policies)
    for j, policy in enumerate(policies):
        vals = [mean.get((policy, f), np.nan) for f in freqs]
        errs = [ci.get((policy, f), 0.0) for f in freqs]
        ax.bar(x + (j - (len(policies) - 1) / 2) * width, vals, width,
               yerr=errs, capsize=3, **_style(policy))
    ax.set_xticks(x, [f"{f / 1e9:.0f} GHz" for f in freqs])
    ax.set_ylabel("mean effective rate (bit/s/Hz)")
    ax.grid(alpha=0.3, axis="y")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> Path:
    """Validate, build and write one figure; returns the output path.

    Inputs are read-only; with fixed styling and inputs the output bytes are
    reproducible (Agg backend, no timestamps in the image metadata).
    """
    fig = build_figure(spec)
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    save_kwargs = {"dpi": spec.styling.get("dpi", 150)}
    if spec.output.suffix.lower() == ".png":
        save_kwargs["metadata"] = {"Software": None}
    try:
        fig.savefig(spec.output, **save_kwargs)
    finally:
        plt.close(fig)
    return spec.output
