import pytest

RATE_CSV = """# schema=rate_timeseries v1
t_s,policy,mean_rate_bps_hz,ci95_bps_hz
0.0005,upper_bound,6.1,0.2
0.001,upper_bound,6.0,0.2
0.0005,statistical_tc,5.6,0.3
0.001,statistical_tc,5.5,0.3
0.0005,numerical_tb,5.9,0.25
0.001,numerical_tb,5.8,0.25
0.0005,predicted_tb,5.8,0.3
0.001,predicted_tb,5.7,0.3
"""

DURATIONS_CSV = """# schema=beam_durations v1
category,policy,mean_duration_s,ci95_s,mean_update_count
pedestrian,upper_bound,0.000528,nan,3789.0
pedestrian,statistical_tc,0.000528,nan,3789.0
pedestrian,numerical_tb,0.25,0.1,8.0
pedestrian,predicted_tb,0.21,0.08,9.5
bicycle,upper_bound,0.000132,nan,15152.0
bicycle,statistical_tc,0.000132,nan,15152.0
bicycle,numerical_tb,0.031,0.012,64.0
bicycle,predicted_tb,0.028,0.011,71.0
vehicle,upper_bound,0.0000302,nan,66225.0
vehicle,statistical_tc,0.0000302,nan,66225.0
vehicle,numerical_tb,0.0064,0.002,312.0
vehicle,predicted_tb,0.0058,0.002,345.0
"""

SWEEP_CSV = """# schema=freq_sweep v1
policy,f_c_hz,mean_rate_bps_hz,ci95_bps_hz
upper_bound,142000000000.0,6.3,0.3
upper_bound,280000000000.0,4.5,0.3
statistical_tc,142000000000.0,3.6,0.5
statistical_tc,280000000000.0,2.0,0.4
numerical_tb,142000000000.0,6.0,0.3
numerical_tb,280000000000.0,4.1,0.3
predicted_tb,142000000000.0,5.9,0.35
predicted_tb,280000000000.0,4.0,0.35
"""


@pytest.fixture
def rate_csv(tmp_path):
    path = tmp_path / "benchmark_rates_pedestrian.csv"
    path.write_text(RATE_CSV)
    return path


@pytest.fixture
def durations_csv(tmp_path):
    path = tmp_path / "benchmark_durations.csv"
    path.write_text(DURATIONS_CSV)
    return path


@pytest.fixture
def sweep_csv(tmp_path):
    path = tmp_path / "freq_sweep.csv"
    path.write_text(SWEEP_CSV)
    return path
