"""Hybrid near-/far-field multipath channel synthesis for a THz access point.

World frame: the access point's uniform linear array lies along the +y axis
with its reference element at the origin and broadside pointing along +x, so a
point at distance r and departure angle theta (measured from broadside) sits at
(r*cos(theta), r*sin(theta)).  The wavefront curvature across the aperture is
kept exact: element n of the array sees the target at

    r_n = sqrt(r^2 + (n-1)^2 d^2 - 2 r (n-1) d sin(theta))

which is the plain law of cosines between the reference element, element n and
the target.  The channel is a sum over the line-of-sight path (index 0) and L
single-bounce scatterer paths; scatterers are static, so their departure
geometry is fixed and only the scatterer->UE leg moves the path gain and the
Doppler phase.

Amplitudes come from a close-in reference path-loss model: free-space loss at
1 m plus 10*n*log10(length) plus a lognormal shadowing term that is drawn once
per path per trajectory and frozen.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .mobility import Region, Trajectory, UEState
from .util import SPEED_OF_LIGHT


class GeometryError(ValueError):
    """Inputs describe an impossible array/target geometry."""


class PathLossDomainError(ValueError):
    """Propagation length below the 1 m close-in reference distance."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count, spacing and carrier."""

    num_elements: int
    element_spacing: float
    carrier_frequency: float

    def __post_init__(self):
        if self.num_elements < 1:
            raise ValueError("num_elements must be >= 1")
        if self.element_spacing <= 0.0:
            raise ValueError("element_spacing must be positive")
        if self.carrier_frequency <= 0.0:
            raise ValueError("carrier_frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @classmethod
    def half_wavelength(cls, num_elements: int, carrier_frequency: float) -> "ArrayGeometry":
        """Canonical d = lambda/2 array at the given carrier."""
        spacing = SPEED_OF_LIGHT / carrier_frequency / 2.0
        return cls(num_elements, spacing, carrier_frequency)


def element_distance(r: float, theta: float, n: int, d: float) -> float:
    """Distance from array element n (1-based) to a target at (r, theta)."""
    if r <= 0.0:
        raise GeometryError("target distance must be positive")
    if n < 1:
        raise GeometryError("element index is 1-based")
    m = (n - 1) * d
    radicand = r * r + m * m - 2.0 * r * m * math.sin(theta)
    if radicand < 0.0:
        # Unreachable for real theta (the radicand is (r - m*sin)^2 +
        # m^2*cos^2 >= 0); guards against NaN/inf inputs.
        raise GeometryError(f"negative radicand {radicand} for r={r}, theta={theta}, n={n}, d={d}")
    return math.sqrt(radicand)


def _excess_distances(r, theta, array: ArrayGeometry) -> np.ndarray:
    """Vectorized r_n - r, computed cancellation-free.

    The naive sqrt(r^2 + ...) - r loses ~r*eps of absolute precision, which at
    far-field ranges dwarfs the millimetre wavelength; the equivalent
    (r_n^2 - r^2)/(r_n + r) keeps full precision at any range.  r, theta may
    be scalars or (T,) arrays; returns (N,) or (T, N).
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    offsets = np.arange(array.num_elements, dtype=float) * array.element_spacing
    if r.ndim == 0:
        diff_sq = offsets**2 - 2.0 * r * math.sin(float(theta)) * offsets
        radicand = r * r + diff_sq
        r_col = r
    else:
        diff_sq = offsets[None, :] ** 2 - 2.0 * (r * np.sin(theta))[:, None] * offsets[None, :]
        r_col = r[:, None]
        radicand = r_col * r_col + diff_sq
    if np.any(radicand < 0.0):
        raise GeometryError("negative radicand in element distance computation")
    return diff_sq / (np.sqrt(radicand) + r_col)


def steering_vector(theta: float, r: float, array: ArrayGeometry) -> np.ndarray:
    """Unit-norm spherical-wavefront steering vector for a source at (theta, r).

    Element n carries exp(-j*2*pi/lambda*(r_n - r))/sqrt(N); the reference
    element is exactly 1/sqrt(N).
    """
    if r <= 0.0:
        raise GeometryError("target distance must be positive")
    phase = -2.0 * math.pi / array.wavelength * _excess_distances(r, theta, array)
    return np.exp(1j * phase) / math.sqrt(array.num_elements)


def _steering_block(thetas: np.ndarray, rs: np.ndarray, array: ArrayGeometry) -> np.ndarray:
    """Stack of steering vectors, shape (T, N)."""
    phase = -2.0 * math.pi / array.wavelength * _excess_distances(rs, thetas, array)
    return np.exp(1j * phase) / math.sqrt(array.num_elements)


def rayleigh_distance(array: ArrayGeometry) -> float:
    """Classical near/far-field boundary 2*D^2/lambda with aperture D=(N-1)d."""
    if array.num_elements < 2:
        raise ValueError("rayleigh distance needs at least 2 elements")
    aperture = (array.num_elements - 1) * array.element_spacing
    return 2.0 * aperture * aperture / array.wavelength


def fspl_1m_db(carrier_frequency: float) -> float:
    """Free-space path loss at the 1 m close-in reference distance."""
    return 20.0 * math.log10(4.0 * math.pi * carrier_frequency / SPEED_OF_LIGHT)


def ci_path_loss_db(total_length: float, carrier_frequency: float,
                    exponent: float, shadow_db: float) -> float:
    """Close-in path loss: FSPL(1 m) + 10*n*log10(length/1 m) + shadowing.

    Raises below the 1 m reference distance rather than clamping silently.
    """
    if total_length < 1.0:
        raise PathLossDomainError(
            f"propagation length {total_length} m is below the 1 m reference distance")
    return fspl_1m_db(carrier_frequency) + 10.0 * exponent * math.log10(total_length) + shadow_db


@dataclass(frozen=True)
class Scene:
    """Static world: array, service region, scatterers and frozen shadowing.

    shadow_db holds one draw per path (index 0 = line of sight), frozen for the
    lifetime of a trajectory; build a fresh scene (or call redraw_shadowing)
    per Monte-Carlo run.
    """

    array: ArrayGeometry
    region: Region
    scatterers: np.ndarray
    shadow_db: np.ndarray
    los_exponent: float = 2.1
    nlos_exponent: float = 3.1
    los_shadow_std_db: float = 2.8
    nlos_shadow_std_db: float = 8.3

    def __post_init__(self):
        if self.scatterers.ndim != 2 or (self.scatterers.size and self.scatterers.shape[1] != 2):
            raise ValueError("scatterers must be an (L, 2) array")
        if self.shadow_db.shape != (self.num_paths,):
            raise ValueError("need one shadow draw per path (LoS + scatterers)")

    @property
    def num_scatterers(self) -> int:
        return self.scatterers.shape[0]

    @property
    def num_paths(self) -> int:
        return self.num_scatterers + 1

    @classmethod
    def build(cls, array: ArrayGeometry, region: Region, num_scatterers: int,
              rng: np.random.Generator, scatterers=None, **kwargs) -> "Scene":
        """Draw scatterer positions (uniform in the region, outside the AP
        keep-out and at least 1 m out so the close-in model applies) and one
        shadowing value per path."""
        min_dist = max(region.keepout_radius, 1.0)
        if scatterers is None:
            pts = []
            while len(pts) < num_scatterers:
                x = rng.uniform(region.x_min, region.x_max)
                y = rng.uniform(region.y_min, region.y_max)
                if math.hypot(x, y) >= min_dist:
                    pts.append((x, y))
            scatterers = np.asarray(pts, dtype=float).reshape(num_scatterers, 2)
        else:
            scatterers = np.asarray(scatterers, dtype=float).reshape(-1, 2)
        scene = cls(array=array, region=region, scatterers=scatterers,
                    shadow_db=np.zeros(scatterers.shape[0] + 1), **kwargs)
        return scene.redraw_shadowing(rng)

    def redraw_shadowing(self, rng: np.random.Generator) -> "Scene":
        stds = np.concatenate(
            [[self.los_shadow_std_db], np.full(self.num_scatterers, self.nlos_shadow_std_db)])
        return replace(self, shadow_db=rng.standard_normal(self.num_paths) * stds)

    def to_json(self, path) -> None:
        payload = {
            "format": "nfbeam-scene/1",
            "array": {
                "num_elements": self.array.num_elements,
                "element_spacing": self.array.element_spacing,
                "carrier_frequency": self.array.carrier_frequency,
            },
            "region": {
                "x_min": self.region.x_min, "x_max": self.region.x_max,
                "y_min": self.region.y_min, "y_max": self.region.y_max,
                "keepout_radius": self.region.keepout_radius,
            },
            "scatterers": self.scatterers.tolist(),
            "shadow_db": self.shadow_db.tolist(),
            "los_exponent": self.los_exponent,
            "nlos_exponent": self.nlos_exponent,
            "los_shadow_std_db": self.los_shadow_std_db,
            "nlos_shadow_std_db": self.nlos_shadow_std_db,
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_json(cls, path) -> "Scene":
        with open(path) as f:
            payload = json.load(f)
        if payload.get("format") != "nfbeam-scene/1":
            raise ValueError(f"{path}: not a scene file")
        return cls(
            array=ArrayGeometry(**payload["array"]),
            region=Region(**payload["region"]),
            scatterers=np.asarray(payload["scatterers"], dtype=float).reshape(-1, 2),
            shadow_db=np.asarray(payload["shadow_db"], dtype=float),
            los_exponent=payload["los_exponent"],
            nlos_exponent=payload["nlos_exponent"],
            los_shadow_std_db=payload["los_shadow_std_db"],
            nlos_shadow_std_db=payload["nlos_shadow_std_db"],
        )


@dataclass(frozen=True)
class PathGeometry:
    """Departure-side geometry of one propagation path at one instant."""

    path_index: int
    distance: float        # reference element -> UE (LoS) or -> scatterer
    angle: float           # angle of departure from broadside
    total_length: float    # full propagation length driving the path loss

    def __post_init__(self):
        if self.distance <= 0.0:
            raise GeometryError("path distance must be positive")
        if self.total_length < self.distance - 1e-12:
            raise GeometryError("total propagation length cannot undercut the departure leg")


@dataclass
class PathState:
    """PathGeometry plus gain and accumulated Doppler phase bookkeeping."""

    geometry: PathGeometry
    amplitude: float       # linear |g|
    shadow_db: float
    doppler_phase: float   # accumulated, never wrapped for arithmetic

    @property
    def doppler_phase_wrapped(self) -> float:
        """Reporting convenience only; arithmetic always uses the raw value."""
        return self.doppler_phase % (2.0 * math.pi)


@dataclass
class ChannelSnapshot:
    """Channel vector h plus the per-path bookkeeping it was summed from."""

    h: np.ndarray
    paths: list[PathState]
    timestamp: float


def path_geometries(scene: Scene, x: float, y: float) -> list[PathGeometry]:
    """Current geometry of every path for a UE at (x, y)."""
    out = [PathGeometry(0, math.hypot(x, y), math.atan2(y, x), math.hypot(x, y))]
    for i in range(scene.num_scatterers):
        sx, sy = scene.scatterers[i]
        leg_ap = math.hypot(sx, sy)
        leg_ue = math.hypot(x - sx, y - sy)
        out.append(PathGeometry(i + 1, leg_ap, math.atan2(sy, sx), leg_ap + leg_ue))
    return out


def _path_amplitude(scene: Scene, geo: PathGeometry, shadow_db: float) -> float:
    exponent = scene.los_exponent if geo.path_index == 0 else scene.nlos_exponent
    pl = ci_path_loss_db(geo.total_length, scene.array.carrier_frequency, exponent, shadow_db)
    return 10.0 ** (-pl / 20.0)


def synthesize_channel(scene: Scene, ue: UEState,
                       prev: ChannelSnapshot | None, delta: float) -> ChannelSnapshot:
    """One channel snapshot; chains Doppler phase from the previous snapshot.

    Each path contributes amplitude * exp(-j*2*pi*r/lambda) * exp(+j*phi_dopp)
    times its steering vector; the Doppler phase accumulates as
    2*pi*(v/lambda)*cos(theta)*delta per step and starts at zero when there is
    no previous snapshot.
    """
    if not scene.region.contains(ue.x, ue.y):
        raise GeometryError(f"UE at ({ue.x}, {ue.y}) is outside the scene region")
    if prev is not None:
        if len(prev.paths) != scene.num_paths:
            raise ValueError("previous snapshot path count does not match the scene")
        if abs((ue.t - prev.timestamp) - delta) > 1e-9:
            raise ValueError("snapshot timestamps must differ by exactly delta")

    lam = scene.array.wavelength
    geos = path_geometries(scene, ue.x, ue.y)
    h = np.zeros(scene.array.num_elements, dtype=complex)
    paths = []
    for geo in geos:
        shadow = float(scene.shadow_db[geo.path_index])
        amp = _path_amplitude(scene, geo, shadow)
        if prev is None:
            phase = 0.0
        else:
            inc = 2.0 * math.pi * ue.v * math.cos(geo.angle) * delta / lam
            phase = prev.paths[geo.path_index].doppler_phase + inc
        coeff = amp * np.exp(-2j * math.pi * geo.distance / lam) * np.exp(1j * phase)
        h += coeff * steering_vector(geo.angle, geo.distance, scene.array)
        paths.append(PathState(geometry=geo, amplitude=amp, shadow_db=shadow,
                               doppler_phase=phase))
    return ChannelSnapshot(h=h, paths=paths, timestamp=ue.t)


_CHUNK = 4096  # cap for (steps x elements) steering blocks, keeps memory flat


class LinkTrace:
    """Per-step channel coefficients along one trajectory, vectorized.

    Precomputes, for every trajectory sample, the line-of-sight geometry and
    each path's complex coefficient (gain x distance phase x accumulated
    Doppler phase).  Beam gains over a span of steps then reduce to the
    line-of-sight steering block times a fixed beamforming vector plus constant
    scatterer projections, which is what makes exhaustive beam-lifetime
    searches affordable.
    """

    def __init__(self, scene: Scene, traj: Trajectory):
        self.scene = scene
        self.traj = traj
        array = scene.array
        lam = array.wavelength

        x, y, v = traj.x, traj.y, traj.v
        self.r0 = np.hypot(x, y)
        if np.any(self.r0 <= 0.0):
            raise GeometryError("trajectory passes through the array reference element")
        self.theta0 = np.arctan2(y, x)

        n_paths = scene.num_paths
        T = len(traj)
        coeff = np.empty((n_paths, T), dtype=complex)

        # Line of sight: distance phase follows r0(t); Doppler integrates
        # v(t)*cos(theta0(t)) along the trajectory at its native step.
        amps = self._amplitudes(self.r0, scene.los_exponent, float(scene.shadow_db[0]))
        dopp = self._doppler_phase(v, self.theta0, traj.delta, lam)
        coeff[0] = amps * np.exp(-2j * np.pi * self.r0 / lam) * np.exp(1j * dopp)

        # Scatterer paths: departure geometry is frozen, only the total length
        # (gain) and the Doppler phase evolve.
        self.nlos_steering = np.empty((scene.num_scatterers, array.num_elements), dtype=complex)
        self.nlos_theta = np.empty(scene.num_scatterers)
        for i in range(scene.num_scatterers):
            sx, sy = scene.scatterers[i]
            leg_ap = math.hypot(sx, sy)
            theta = math.atan2(sy, sx)
            total = leg_ap + np.hypot(x - sx, y - sy)
            amps = self._amplitudes(total, scene.nlos_exponent, float(scene.shadow_db[i + 1]))
            dopp = self._doppler_phase(v, np.full(T, theta), traj.delta, lam)
            coeff[i + 1] = amps * np.exp(-2j * np.pi * leg_ap / lam) * np.exp(1j * dopp)
            self.nlos_steering[i] = steering_vector(theta, leg_ap, array)
            self.nlos_theta[i] = theta
        self.coeff = coeff

    def _amplitudes(self, lengths: np.ndarray, exponent: float, shadow: float) -> np.ndarray:
        if np.any(lengths < 1.0):
            raise PathLossDomainError("trajectory brings a path below the 1 m reference distance")
        pl = fspl_1m_db(self.scene.array.carrier_frequency) \
            + 10.0 * exponent * np.log10(lengths) + shadow
        return 10.0 ** (-pl / 20.0)

    @staticmethod
    def _doppler_phase(v: np.ndarray, theta: np.ndarray, delta: float, lam: float) -> np.ndarray:
        inc = 2.0 * np.pi * v * np.cos(theta) * delta / lam
        phase = np.cumsum(inc)
        # Accumulation starts at zero: shift so phase[0] = 0 and each step adds
        # the *current* step's increment.
        return phase - inc[0] if phase.size else phase

    def __len__(self) -> int:
        return len(self.traj)

    def steering_block(self, k0: int, k1: int) -> np.ndarray:
        """Line-of-sight steering vectors for steps [k0, k1), shape (k1-k0, N)."""
        return _steering_block(self.theta0[k0:k1], self.r0[k0:k1], self.scene.array)

    def channel_projection(self, f: np.ndarray, k0: int, k1: int) -> np.ndarray:
        """h(t)^H f for steps [k0, k1) with a fixed beamforming vector f."""
        out = np.zeros(k1 - k0, dtype=complex)
        nlos_proj = self.nlos_steering.conj() @ f if self.scene.num_scatterers else None
        for c0 in range(k0, k1, _CHUNK):
            c1 = min(c0 + _CHUNK, k1)
            block = self.steering_block(c0, c1)
            proj = block.conj() @ f
            seg = np.conj(self.coeff[0, c0:c1]) * proj
            for i in range(self.scene.num_scatterers):
                seg += np.conj(self.coeff[i + 1, c0:c1]) * nlos_proj[i]
            out[c0 - k0:c1 - k0] = seg
        return out

    def gain_series(self, f: np.ndarray, k0: int, k1: int) -> np.ndarray:
        """Beam gain |h(t)^H f|^2 for steps [k0, k1)."""
        return np.abs(self.channel_projection(f, k0, k1)) ** 2

    def stale_matched_gain_series(self, k0: int, k1: int) -> np.ndarray:
        """Gain at each step for a beam re-aimed at the *previous* step.

        Step k in [k0, k1) is evaluated with f = a[theta0(k-1), r0(k-1)]; this
        is the every-step re-aim policy under a one-step actuation lag.
        """
        if k0 < 1:
            raise ValueError("stale matched gain needs a previous step to aim from")
        out = np.empty(k1 - k0)
        for c0 in range(k0, k1, _CHUNK):
            c1 = min(c0 + _CHUNK, k1)
            block = self.steering_block(c0 - 1, c1)
            aim, cur = block[:-1], block[1:]
            proj = np.einsum("tn,tn->t", cur.conj(), aim)
            seg = np.conj(self.coeff[0, c0:c1]) * proj
            for i in range(self.scene.num_scatterers):
                nlos_proj = aim @ self.nlos_steering[i].conj()
                seg += np.conj(self.coeff[i + 1, c0:c1]) * nlos_proj
            out[c0 - k0:c1 - k0] = np.abs(seg) ** 2
        return out

    def los_geometry(self, k: int) -> tuple[float, float]:
        """(theta0, r0) at step k, the aim point for a fresh beam."""
        return float(self.theta0[k]), float(self.r0[k])
