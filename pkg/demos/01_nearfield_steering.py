"""Near-field steering vectors and where the far field actually begins.

A terahertz access point with hundreds of half-wavelength-spaced elements has
an aperture large enough that users stand inside the radiating near field:
the wavefront curvature across the array is visible, and a beam is focused at
a *point* (angle and distance), not just a direction.  This script walks
through the basic geometry: element distances, steering vectors, the Rayleigh
boundary, and how the spherical model collapses onto the familiar planar one
as the target recedes.

Run:  python demos/01_nearfield_steering.py
"""

import math

import numpy as np

from nfbeam.channel import (
    ArrayGeometry,
    element_distance,
    rayleigh_distance,
    steering_vector,
)

array = ArrayGeometry.half_wavelength(512, 142e9)
print(f"array: N={array.num_elements}, spacing {array.element_spacing * 1e3:.3f} mm, "
      f"wavelength {array.wavelength * 1e3:.3f} mm")
print(f"aperture: {(array.num_elements - 1) * array.element_spacing:.3f} m")
print(f"Rayleigh distance 2D^2/lambda: {rayleigh_distance(array):.1f} m")
print("-> the whole 50 m service area sits inside the near field\n")

# Element distances: the law-of-cosines exact form vs the planar approximation.
r, theta = 10.0, math.radians(25)
print(f"target at r={r} m, theta={math.degrees(theta):.0f} deg")
for n in (1, 128, 256, 512):
    exact = element_distance(r, theta, n, array.element_spacing)
    planar = r - (n - 1) * array.element_spacing * math.sin(theta)
    print(f"  element {n:3d}: exact {exact:.6f} m, planar {planar:.6f} m, "
          f"error {(exact - planar) * 1e3:+.3f} mm")
print("-> millimetre-scale errors at a 2 mm wavelength are whole phase turns\n")

# Focusing gain: a beam focused at 10 m, evaluated at other distances on the
# same bearing.  In the near field the coupling collapses away from the focal
# point in *distance*, not just angle.
focus = steering_vector(theta, r, array)
print("gain of a beam focused at (25 deg, 10 m) vs the matched beam elsewhere:")
for r_probe in (5.0, 8.0, 10.0, 15.0, 30.0, 100.0):
    probe = steering_vector(theta, r_probe, array)
    coupling = abs(np.vdot(probe, focus)) ** 2
    print(f"  r={r_probe:6.1f} m: |a(r)^H a(10)|^2 = {coupling:.4f}")
print("-> depth-of-focus selectivity is the defining near-field effect\n")

# Far-field degeneration: the spherical vector converges on the planar limit.
small = ArrayGeometry.half_wavelength(64, 142e9)
n_idx = np.arange(small.num_elements)
print(f"N=64 array (Rayleigh {rayleigh_distance(small):.1f} m): "
      "max per-element phase deviation from the planar limit")
for mult in (1, 10, 100, 1000, 10000):
    r_ff = mult * rayleigh_distance(small)
    nf = steering_vector(theta, r_ff, small)
    ff = np.exp(1j * 2 * np.pi * n_idx * small.element_spacing
                * math.sin(theta) / small.wavelength) / math.sqrt(small.num_elements)
    dev = np.abs(np.angle(nf * np.conj(ff))).max()
    print(f"  r = {mult:>6d} x Rayleigh: {dev:.2e} rad")
print("-> deviation falls as pi/(2k) at k x Rayleigh: 'far field' is gradual")
