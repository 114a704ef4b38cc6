import numpy as np
import pytest

from nfbeam.util import (
    canonical_json,
    dbm_to_watts,
    db_to_linear,
    linear_to_db,
    mean_ci95,
    sha256_text,
    stream,
    thermal_noise_dbm,
    watts_to_dbm,
)


def test_dbm_round_trip():
    assert watts_to_dbm(dbm_to_watts(30.0)) == pytest.approx(30.0, abs=1e-12)
    assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-12)
    assert dbm_to_watts(-94.0) == pytest.approx(3.9811e-13, rel=1e-4)


def test_db_linear_round_trip():
    assert linear_to_db(db_to_linear(-12.5)) == pytest.approx(-12.5, abs=1e-12)


def test_thermal_noise_reference_case():
    # -174 dBm/Hz + 10log10(20 MHz) + 7 dB
    assert thermal_noise_dbm(20e6, 7.0) == pytest.approx(-93.9897, abs=1e-4)


def test_stream_is_deterministic_and_label_sensitive():
    a = stream(7, "x", 1).standard_normal(4)
    b = stream(7, "x", 1).standard_normal(4)
    c = stream(7, "x", 2).standard_normal(4)
    d = stream(7, "y", 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_canonical_json_is_stable():
    assert canonical_json({"b": 1.5, "a": [1, 2]}) == '{"a":[1,2],"b":1.5}'
    assert sha256_text("x") == sha256_text("x")


def test_mean_ci95():
    mean, ci = mean_ci95([1.0, 2.0, 3.0, 4.0])
    assert mean == 2.5
    assert ci == pytest.approx(1.959964 * np.std([1, 2, 3, 4], ddof=1) / 2.0, rel=1e-9)
