"""Beam gain, beam lifetime solving and beam-update policy simulation.

A beam is the steering vector matched to the line-of-sight geometry at its
creation instant.  Holding it while the UE moves, the coupling to the true
channel decays; the beam lifetime is the first time the gain ratio
G(t0+tau)/G(t0) drops to the threshold xi.  Policies differ only in how long
each beam is scheduled to live:

* ``upper_bound``      — re-aim every channel coherence time, zero overhead;
* ``statistical_tc``   — re-aim every channel coherence time, paying overhead;
* ``numerical_tb``     — hold until the measured gain-ratio crossing;
* ``predicted_tb``     — hold for a learned prediction of that crossing (the
  first two lifetimes come from the numerical search to prime the predictor's
  lookback features).

Every step of a trace scores the overhead-discounted spectral efficiency
max(0, (1 - T_ovh/T)) * log2(1 + SNR) with T the active beam's lifetime.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import GeometryError, LinkTrace, Scene, steering_vector
from .mobility import Trajectory, category_params
from .util import dbm_to_watts

POLICY_KINDS = ("upper_bound", "statistical_tc", "numerical_tb", "predicted_tb")


class NumericalFailure(RuntimeError):
    """A solver or simulation hit a numerically meaningless state."""


@dataclass
class Beam:
    """Beamforming vector, its aim point and creation time."""

    f: np.ndarray
    aimed_at: tuple[float, float]  # (theta0, r0)
    created_at: float


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    xi: float = 0.5
    t_ovh: float = 40e-6
    p_t_watts: float = dbm_to_watts(30.0)
    noise_watts: float = dbm_to_watts(-94.0)

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not 0.0 < self.xi <= 1.0:
            raise ValueError("xi must be in (0, 1]")
        if self.t_ovh < 0.0:
            raise ValueError("overhead cannot be negative")


@dataclass(frozen=True)
class SolverParams:
    """First-crossing search grid: check every `step` seconds up to `horizon`."""

    step: float = 5e-4
    horizon: float = 2.0


def beam_gain(h: np.ndarray, f: np.ndarray) -> float:
    """|h^H f|^2 — power coupling between channel h and beamforming vector f."""
    h = np.asarray(h)
    f = np.asarray(f)
    if h.shape != f.shape:
        raise ValueError(f"length mismatch: {h.shape} vs {f.shape}")
    return float(np.abs(np.vdot(h, f)) ** 2)


def snr(gain: float, p_t_watts: float, noise_watts: float) -> float:
    if noise_watts <= 0.0:
        raise ValueError("noise power must be positive")
    if gain < 0.0:
        raise ValueError("beam gain cannot be negative")
    return p_t_watts / noise_watts * gain


def channel_coherence_time(wavelength: float, mean_speed: float) -> float:
    """lambda / (4 * v_mean) — the classical quarter-wavelength decorrelation."""
    if mean_speed <= 0.0:
        raise ValueError("mean speed must be positive")
    return wavelength / (4.0 * mean_speed)


def effective_rate(gamma, lifetime: float, t_ovh: float):
    """Overhead-discounted spectral efficiency, clamped at zero.

    Vectorized over gamma; returns exactly 0 whenever lifetime <= t_ovh.
    """
    if lifetime <= 0.0:
        raise ValueError("beam lifetime must be positive")
    factor = max(0.0, 1.0 - t_ovh / lifetime)
    out = factor * np.log2(1.0 + np.asarray(gamma, dtype=float))
    return float(out) if out.ndim == 0 else out


def aim_beam(link: LinkTrace, k: int) -> Beam:
    """Fresh beam matched to the line-of-sight geometry at step k."""
    theta0, r0 = link.los_geometry(k)
    f = steering_vector(theta0, r0, link.scene.array)
    return Beam(f=f, aimed_at=(theta0, r0), created_at=float(link.traj.t[k]))


@dataclass
class SolveOutcome:
    tau: float
    censored: bool
    ratios: np.ndarray | None = None


def _first_crossing(link: LinkTrace, beam: Beam, k0: int, xi: float,
                    stride: int, max_steps: int, want_gains: bool = False):
    """Smallest multiple of stride steps after k0 where the gain ratio <= xi.

    Scans forward in growing chunks so short-lived beams never pay for the
    full horizon.  Returns (steps, censored, gains, g0) where gains covers
    every native step in (k0, k0+steps] when requested (the policy walk reuses
    them for rates).  Ties at exactly xi count as crossings.
    """
    g0 = link.gain_series(beam.f, k0, k0 + 1)[0]
    if g0 <= 0.0:
        raise NumericalFailure("beam has zero gain at creation; aim is inconsistent")
    threshold = xi * g0
    parts = []
    steps = None
    scanned = 0
    chunk = max(32, stride)  # short-lived beams stay cheap; censored ones ramp up fast
    while scanned < max_steps:
        n = min(chunk, max_steps - scanned)
        g = link.gain_series(beam.f, k0 + 1 + scanned, k0 + 1 + scanned + n)
        parts.append(g)
        # Native-step offset i in this chunk is a search grid point when the
        # elapsed step count (scanned + i + 1) is a multiple of the stride.
        offsets = np.arange(scanned + 1, scanned + n + 1)
        grid = np.flatnonzero(offsets % stride == 0)
        if grid.size:
            hit = grid[g[grid] <= threshold]
            if hit.size:
                steps = scanned + int(hit[0]) + 1
                break
        scanned += n
        chunk = min(chunk * 4, 4096)
    censored = steps is None
    if censored:
        steps = max_steps
    if want_gains:
        gains = np.concatenate(parts)[:steps]
        return steps, censored, gains, g0
    return steps, censored, None, g0


def solve_beam_coherence_time(
    scene: Scene,
    traj: Trajectory,
    t0: float,
    beam: Beam | None = None,
    xi: float = 0.5,
    search: SolverParams = SolverParams(),
    link: LinkTrace | None = None,
    return_ratios: bool = False,
) -> SolveOutcome:
    """Exhaustive first-crossing search for the beam lifetime at t0.

    The channel (gains, Doppler accumulation) always evolves at the
    trajectory's native sampling step; `search.step` selects which grid points
    are checked for the crossing, so a coarse search and a fine search see the
    same underlying channel.  Returns horizon, flagged censored, when the gain
    ratio never reaches xi.
    """
    if link is None:
        link = LinkTrace(scene, traj)
    delta = traj.delta
    stride = int(round(search.step / delta))
    if stride < 1 or abs(stride * delta - search.step) > 1e-9:
        raise ValueError("search step must be a positive multiple of the trajectory step")
    k0 = traj.index_at(t0)
    n_h = int(round(search.horizon / delta))
    if k0 + n_h > len(traj) - 1:
        raise ValueError("t0 + horizon runs past the end of the trajectory")
    if beam is None:
        beam = aim_beam(link, k0)
    steps, censored, gains, g0 = _first_crossing(
        link, beam, k0, xi, stride, n_h, want_gains=return_ratios)
    tau = search.horizon if censored else steps * delta
    ratios = gains / g0 if return_ratios else None
    return SolveOutcome(tau=tau, censored=censored, ratios=ratios)


@dataclass
class RateTrace:
    """Per-step effective rate and SNR of one policy run, plus beam bookkeeping."""

    policy: str
    t: np.ndarray
    rate: np.ndarray
    snr_db: np.ndarray
    beam_id: np.ndarray
    update_times: list[float] = field(default_factory=list)
    durations: list[float] = field(default_factory=list)

    @property
    def mean_rate(self) -> float:
        return float(np.mean(self.rate))

    @property
    def mean_duration(self) -> float:
        return float(np.mean(self.durations))

    @property
    def update_count(self) -> int:
        return len(self.update_times)

    def summary(self) -> dict:
        return {
            "policy": self.policy,
            "mean_rate_bps_hz": self.mean_rate,
            "mean_beam_duration_s": self.mean_duration,
            "update_count": self.update_count,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            f.write("# schema=rate_trace v1\n")
            w = csv.writer(f)
            w.writerow(["t_s", "rate_bps_hz", "snr_db", "beam_id"])
            for k in range(self.t.size):
                w.writerow([repr(float(self.t[k])), repr(float(self.rate[k])),
                            repr(float(self.snr_db[k])), int(self.beam_id[k])])


def simulate_policy(
    scene: Scene,
    traj: Trajectory,
    policy: PolicyConfig,
    predictor=None,
    rng=None,
    search: SolverParams = SolverParams(),
) -> RateTrace:
    """Walk a trajectory under one beam-update policy and record the rate trace.

    The SNR at every step is evaluated against the true evolving channel with
    the currently held beam; re-aiming uses the noiseless line-of-sight
    geometry.  `rng` is accepted for interface stability; the base policies
    are deterministic given scene and trajectory.
    """
    if policy.kind == "predicted_tb" and predictor is None:
        raise ValueError("predicted_tb needs a trained predictor")
    link = LinkTrace(scene, traj)
    delta = traj.delta
    n_steps = len(traj) - 1
    stride = int(round(search.step / delta))
    if stride < 1:
        raise ValueError("search step must be at least the trajectory step")
    n_h = int(round(search.horizon / delta))
    snr_scale = policy.p_t_watts / policy.noise_watts

    t_c = channel_coherence_time(scene.array.wavelength, category_params(traj.category).v_mean)
    t_ovh = 0.0 if policy.kind == "upper_bound" else policy.t_ovh

    rate = np.empty(n_steps)
    snr_db = np.empty(n_steps)
    beam_ids = np.empty(n_steps, dtype=int)
    update_times: list[float] = []
    durations: list[float] = []

    if policy.kind in ("upper_bound", "statistical_tc") and max(1, round(t_c / delta)) == 1:
        # Re-aim every step: vectorized fast path, lifetime is T_C throughout.
        gains = link.stale_matched_gain_series(1, n_steps + 1)
        gammas = snr_scale * gains
        rate[:] = effective_rate(gammas, t_c, t_ovh)
        snr_db[:] = 10.0 * np.log10(np.maximum(gammas, 1e-300))
        beam_ids[:] = np.arange(n_steps)
        update_times = [float(t) for t in traj.t[:-1]]
        durations = [t_c] * n_steps
        return RateTrace(policy.kind, traj.t[1:].copy(), rate, snr_db, beam_ids,
                         update_times, durations)

    k = 0
    beam_id = 0
    lifetimes: list[float] = []
    while k < n_steps:
        remaining = n_steps - k
        beam = aim_beam(link, k)
        censored = False
        gains = None
        if policy.kind in ("upper_bound", "statistical_tc"):
            lifetime = t_c
            steps = min(max(1, int(round(t_c / delta))), remaining)
        elif policy.kind == "numerical_tb":
            max_steps = min(n_h, remaining)
            steps, censored, gains, _ = _first_crossing(
                link, beam, k, policy.xi, stride, max_steps, want_gains=True)
            lifetime = steps * delta
        else:  # predicted_tb
            if len(lifetimes) < 2:
                max_steps = min(n_h, remaining)
                steps, censored, gains, _ = _first_crossing(
                    link, beam, k, policy.xi, stride, max_steps, want_gains=True)
            else:
                features = _lookback_features(link, k, lifetimes[-1], lifetimes[-2])
                predicted = predictor.predict_tb(features)
                steps = min(max(1, int(round(predicted / delta))), remaining)
            lifetime = steps * delta

        if gains is None:
            gains = link.gain_series(beam.f, k + 1, k + steps + 1)
        gammas = snr_scale * gains
        rate[k:k + steps] = effective_rate(gammas, lifetime, t_ovh)
        snr_db[k:k + steps] = 10.0 * np.log10(np.maximum(gammas, 1e-300))
        beam_ids[k:k + steps] = beam_id
        update_times.append(float(traj.t[k]))
        durations.append(lifetime)
        lifetimes.append(lifetime)
        k += steps
        beam_id += 1

    return RateTrace(policy.kind, traj.t[1:].copy(), rate, snr_db, beam_ids,
                     update_times, durations)


def _lookback_features(link: LinkTrace, k: int, tb_prev: float, tb_prev2: float) -> np.ndarray:
    """Kinematic feature vector at step k with the two previous beam lifetimes."""
    from .dataset import features_from_link  # local import: dataset sits above policy

    return features_from_link(link, k, tb_prev, tb_prev2)
