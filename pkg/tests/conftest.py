import math

import numpy as np
import pytest

from nfbeam.channel import ArrayGeometry, Scene
from nfbeam.mobility import Region
from nfbeam.util import stream

# One-sided 95% Student-t critical values by degrees of freedom (1..30);
# fall back to the normal quantile beyond the table.
T95_ONE_SIDED = {
    1: 6.314, 2: 2.920, 3: 2.353, 4: 2.132, 5: 2.015, 6: 1.943, 7: 1.895,
    8: 1.860, 9: 1.833, 10: 1.812, 11: 1.796, 12: 1.782, 13: 1.771, 14: 1.761,
    15: 1.753, 16: 1.746, 17: 1.740, 18: 1.734, 19: 1.729, 20: 1.725,
    21: 1.721, 22: 1.717, 23: 1.714, 24: 1.711, 25: 1.708, 26: 1.706,
    27: 1.703, 28: 1.701, 29: 1.699, 30: 1.697,
}


def t95(df: int) -> float:
    return T95_ONE_SIDED.get(df, 1.645)


def one_sided_t(values, threshold=0.0) -> float:
    """t statistic for mean(values) > threshold."""
    x = np.asarray(values, dtype=float)
    se = x.std(ddof=1) / math.sqrt(x.size)
    return (x.mean() - threshold) / se


def welch_t(a, b) -> float:
    """t statistic for mean(a) > mean(b), unequal variances."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (a.mean() - b.mean()) / math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)


@pytest.fixture
def region():
    return Region(keepout_radius=2.0)


@pytest.fixture
def small_scene(region):
    """8-element scene with two scatterers, fixed seed."""
    array = ArrayGeometry.half_wavelength(8, 142e9)
    return Scene.build(array, region, 2, stream(123, "small-scene"))
