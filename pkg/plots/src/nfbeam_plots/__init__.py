"""Figure rendering for nfbeam benchmark CSVs.

Consumes only the versioned CSV schemas documented in the simulator's README
(rate_timeseries, beam_durations, freq_sweep); zero coupling to the simulator
internals.
"""

__version__ = "0.1.0"
