"""Small shared helpers: unit conversions, seeded RNG streams, hashing, stats."""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact by definition


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(watts) + 30.0


def thermal_noise_dbm(bandwidth_hz: float, noise_figure_db: float = 0.0) -> float:
    """Receiver noise floor: -174 dBm/Hz + 10*log10(B) + NF."""
    return -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def stream(master_seed: int, *labels) -> np.random.Generator:
    """Reproducible RNG derived from a master seed and a stable label path.

    String labels are hashed with sha256 so stream identity never depends on
    Python's per-process hash salt; integer labels are used as-is.
    """
    entropy = [int(master_seed)]
    for label in labels:
        if isinstance(label, str):
            digest = hashlib.sha256(label.encode("utf-8")).digest()
            entropy.append(int.from_bytes(digest[:8], "big"))
        else:
            entropy.append(int(label))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def canonical_json(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed separators)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while True:
            block = f.read(1 << 20)
            if not block:
                break
            h.update(block)
    return h.hexdigest()


def mean_ci95(values) -> tuple[float, float]:
    """Sample mean and normal-approximation 95% half-width."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return float("nan"), float("nan")
    if x.size == 1:
        return float(x[0]), float("nan")
    se = float(np.std(x, ddof=1)) / math.sqrt(x.size)
    return float(np.mean(x)), 1.959964 * se
