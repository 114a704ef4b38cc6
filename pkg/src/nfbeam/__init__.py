"""nfbeam: near-field THz link simulation and beam-lifetime prediction.

Subpackages by concern: `channel` (spherical-wavefront array + multipath
synthesis), `mobility` (Gauss-Markov trajectories), `policy` (beam gain,
lifetime solving, update-policy simulation), `dataset` (labeled lifetime
datasets), `fnn` (from-scratch feedforward regressor), `harness` + `cli`
(reproducible experiment driver).
"""

__version__ = "0.1.0"
