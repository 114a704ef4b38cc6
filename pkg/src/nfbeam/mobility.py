"""Gauss-Markov UE mobility: smooth random trajectories in a bounded service area.

Speed and heading follow a first-order autoregressive update

    v'   = alpha*v   + (1 - alpha)*v_mean   + sqrt(1 - alpha^2) * sigma_v  * V
    phi' = alpha*phi + (1 - alpha)*phi_mean + sqrt(1 - alpha^2) * sigma_phi * Phi

with V, Phi standard normal.  The sqrt(1 - alpha^2) factor makes the stationary
standard deviations exactly sigma_v / sigma_phi.  After the raw update the speed
is clamped into the category's speed range and the magnitude of the heading
increment is clamped into the category's direction-change range.  Positions
advance with the pre-update speed/heading and reflect specularly off the region
walls (and off an optional keep-out disk around the access point at the origin).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

CATEGORIES = ("pedestrian", "bicycle", "vehicle")


@dataclass(frozen=True)
class MobilityParams:
    """Per-category Gauss-Markov constants."""

    alpha: float
    v_mean: float
    phi_mean: float
    speed_range: tuple[float, float]
    direction_change_range: tuple[float, float]
    sigma_v: float
    sigma_phi: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        lo, hi = self.speed_range
        if not 0.0 <= lo <= hi:
            raise ValueError(f"invalid speed range {self.speed_range}")
        dlo, dhi = self.direction_change_range
        if dlo > dhi:
            raise ValueError(f"invalid direction-change range {self.direction_change_range}")


# Category table: speed ranges, memory factors and direction-change ranges for
# the three urban mobility profiles; v_mean is the speed-range midpoint, the
# noise scales are sigma_v = range/4 and sigma_phi = half the direction window.
_CATEGORY_TABLE = {
    "pedestrian": MobilityParams(
        alpha=0.3,
        v_mean=1.0,
        phi_mean=0.0,
        speed_range=(0.5, 1.5),
        direction_change_range=(math.pi / 2, 3 * math.pi / 4),
        sigma_v=0.25,
        sigma_phi=math.pi / 8,
    ),
    "bicycle": MobilityParams(
        alpha=0.5,
        v_mean=4.0,
        phi_mean=0.0,
        speed_range=(2.0, 6.0),
        direction_change_range=(math.pi / 4, math.pi / 2),
        sigma_v=1.0,
        sigma_phi=math.pi / 8,
    ),
    "vehicle": MobilityParams(
        alpha=0.7,
        v_mean=17.5,
        phi_mean=0.0,
        speed_range=(10.0, 25.0),
        direction_change_range=(0.0, math.pi / 8),
        sigma_v=3.75,
        sigma_phi=math.pi / 16,
    ),
}


def category_params(category: str) -> MobilityParams:
    """Mobility constants for one of {pedestrian, bicycle, vehicle}.

    phi_mean defaults to 0 here; trajectory generation replaces it with the
    initial heading.
    """
    try:
        return _CATEGORY_TABLE[category]
    except KeyError:
        raise ValueError(f"unknown mobility category {category!r}") from None


@dataclass(frozen=True)
class Region:
    """Rectangular service area with an optional keep-out disk at the origin."""

    x_min: float = 0.0
    x_max: float = 50.0
    y_min: float = -25.0
    y_max: float = 25.0
    keepout_radius: float = 0.0

    def contains(self, x: float, y: float) -> bool:
        inside = self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max
        if inside and self.keepout_radius > 0.0:
            inside = math.hypot(x, y) >= self.keepout_radius
        return inside

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        """Uniform position inside the region (rejection over the keep-out disk)."""
        while True:
            x = rng.uniform(self.x_min, self.x_max)
            y = rng.uniform(self.y_min, self.y_max)
            if self.keepout_radius <= 0.0 or math.hypot(x, y) >= self.keepout_radius:
                return x, y


@dataclass
class UEState:
    x: float
    y: float
    v: float
    phi: float
    t: float


def step_gauss_markov(state: UEState, params: MobilityParams, rng, clamp: bool = True):
    """One speed/heading update; returns (v_next, phi_next).

    With clamp=True the speed is clipped into the category speed range and the
    heading increment magnitude is clipped into the direction-change range
    (sign preserved; a zero raw increment stays zero).
    """
    noise = rng.standard_normal(2)
    a = params.alpha
    drift = math.sqrt(1.0 - a * a)
    v_next = a * state.v + (1.0 - a) * params.v_mean + drift * params.sigma_v * noise[0]
    phi_next = a * state.phi + (1.0 - a) * params.phi_mean + drift * params.sigma_phi * noise[1]
    if clamp:
        v_next = min(max(v_next, params.speed_range[0]), params.speed_range[1])
        dphi = phi_next - state.phi
        lo, hi = params.direction_change_range
        if dphi != 0.0:
            mag = min(max(abs(dphi), lo), hi)
            phi_next = state.phi + math.copysign(mag, dphi)
    return v_next, phi_next


def update_position(state: UEState, delta: float, region: Region | None = None):
    """Advance the position by v*delta along the current heading.

    If a region is given the new position is reflected specularly at its
    boundaries (the heading transform that goes with the bounce is handled by
    the trajectory generator, which mirrors all live headings together).
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    x = state.x + state.v * delta * math.cos(state.phi)
    y = state.y + state.v * delta * math.sin(state.phi)
    if region is None:
        return x, y
    x, y, _ = _reflect(x, y, (state.phi,), region)
    return x, y


def _mirror_heading(phi: float, axis: str, normal=None) -> float:
    if axis == "x":
        return math.pi - phi
    if axis == "y":
        return -phi
    nx, ny = normal
    vx, vy = math.cos(phi), math.sin(phi)
    dot = vx * nx + vy * ny
    return math.atan2(vy - 2.0 * dot * ny, vx - 2.0 * dot * nx)


def _reflect(x: float, y: float, headings: tuple, region: Region):
    """Specular reflection of a point (and any live headings) into the region.

    Iterates because a corner (or the keep-out disk at the region edge) can
    need more than one bounce; step lengths are millimetres against a ~50 m
    region, so this converges immediately in practice.
    """
    headings = list(headings)
    for _ in range(16):
        if x < region.x_min:
            x = 2.0 * region.x_min - x
            headings = [_mirror_heading(p, "x") for p in headings]
        elif x > region.x_max:
            x = 2.0 * region.x_max - x
            headings = [_mirror_heading(p, "x") for p in headings]
        elif y < region.y_min:
            y = 2.0 * region.y_min - y
            headings = [_mirror_heading(p, "y") for p in headings]
        elif y > region.y_max:
            y = 2.0 * region.y_max - y
            headings = [_mirror_heading(p, "y") for p in headings]
        elif region.keepout_radius > 0.0 and math.hypot(x, y) < region.keepout_radius:
            r = math.hypot(x, y)
            if r < 1e-12:
                # Degenerate hit on the exact origin: push out along heading 0.
                x = region.keepout_radius * math.cos(headings[0])
                y = region.keepout_radius * math.sin(headings[0])
                continue
            # Mirror radially across the disk boundary, reflect headings about
            # the tangent plane (normal = radial direction).
            normal = (x / r, y / r)
            scale = (2.0 * region.keepout_radius - r) / r
            x, y = x * scale, y * scale
            headings = [_mirror_heading(p, "disk", normal) for p in headings]
        else:
            return x, y, headings
    raise RuntimeError("reflection did not converge; step size is inconsistent with region")


@dataclass
class Trajectory:
    """Time-indexed UE kinematics sampled every `delta` seconds."""

    category: str
    delta: float
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    phi: np.ndarray

    def __len__(self) -> int:
        return self.t.size

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def state_at(self, k: int) -> UEState:
        return UEState(
            x=float(self.x[k]), y=float(self.y[k]), v=float(self.v[k]),
            phi=float(self.phi[k]), t=float(self.t[k]),
        )

    def index_at(self, t: float) -> int:
        """Nearest sample index for time t (clamped to the trajectory span)."""
        k = int(round((t - float(self.t[0])) / self.delta))
        return min(max(k, 0), len(self) - 1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            f.write(f"# category={self.category} delta={self.delta!r}\n")
            w = csv.writer(f)
            w.writerow(["t", "x", "y", "v", "phi"])
            for k in range(len(self)):
                w.writerow([repr(float(c[k])) for c in (self.t, self.x, self.y, self.v, self.phi)])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as f:
            meta = f.readline().strip()
            if not meta.startswith("# category="):
                raise ValueError(f"{path}: missing trajectory header line")
            fields = dict(part.split("=", 1) for part in meta[2:].split())
            rows = list(csv.reader(f))
        if rows[0] != ["t", "x", "y", "v", "phi"]:
            raise ValueError(f"{path}: unexpected columns {rows[0]}")
        data = np.asarray(rows[1:], dtype=float)
        return cls(
            category=fields["category"], delta=float(fields["delta"]),
            t=data[:, 0], x=data[:, 1], y=data[:, 2], v=data[:, 3], phi=data[:, 4],
        )


def generate_trajectory(
    category: str,
    duration: float,
    delta: float,
    region: Region,
    rng: np.random.Generator,
) -> Trajectory:
    """Simulate floor(duration/delta)+1 states of Gauss-Markov motion.

    The initial position is uniform in the region, the initial speed uniform in
    the category's speed range, the initial heading uniform in [0, 2*pi); the
    mean heading is pinned to the initial heading and mirrored together with
    the state on boundary reflections (otherwise mean reversion would drive
    the UE back into the wall it just bounced off).
    """
    if duration < delta:
        raise ValueError("duration must be at least one step")
    params = category_params(category)
    n_steps = int(math.floor(duration / delta + 1e-9))

    x0, y0 = region.sample(rng)
    v0 = rng.uniform(*params.speed_range)
    phi0 = rng.uniform(0.0, 2.0 * math.pi)
    params = replace(params, phi_mean=phi0)

    xs = np.empty(n_steps + 1)
    ys = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    phis = np.empty(n_steps + 1)
    xs[0], ys[0], vs[0], phis[0] = x0, y0, v0, phi0

    state = UEState(x=x0, y=y0, v=v0, phi=phi0, t=0.0)
    for k in range(1, n_steps + 1):
        v_next, phi_next = step_gauss_markov(state, params, rng)
        x = state.x + state.v * delta * math.cos(state.phi)
        y = state.y + state.v * delta * math.sin(state.phi)
        if not region.contains(x, y):
            # Mirror the displaced point together with the fresh heading and
            # the mean heading, so mean reversion keeps pointing into the
            # region after the bounce.
            x, y, (phi_next, phi_mean) = _reflect(x, y, (phi_next, params.phi_mean), region)
            params = replace(params, phi_mean=phi_mean)
        state = UEState(x=x, y=y, v=v_next, phi=phi_next, t=k * delta)
        xs[k], ys[k], vs[k], phis[k] = x, y, v_next, phi_next

    t = np.arange(n_steps + 1, dtype=float) * delta
    return Trajectory(category=category, delta=delta, t=t, x=xs, y=ys, v=vs, phi=phis)
