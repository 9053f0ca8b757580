"""Calibrate the mass machinery on a Schwarzschild slice.

Three independent routes to the same number: the flux of the conformal
factor through far spheres, harmonic exterior solves with extrapolation in
the truncation radius, and the Brown-York mass of the horizon, which should
be ``16 pi m`` in the ``int (H0 - H)`` normalization.

Run with ``python demos/schwarzschild_calibration.py``.
"""
import warnings

import numpy as np

from massbounds import scenarios
from massbounds.errors import ExtrapolationUnreliable
from massbounds.mass import adm_mass, brown_york

m = 1.0
sc = scenarios.schwarzschild(m)
metric = sc.build(32)

with warnings.catch_warnings():
    warnings.simplefilter("ignore", ExtrapolationUnreliable)
    adm = adm_mass(metric, scenarios.adm_radii(metric))
print(f"flux ADM mass on a 32^3 grid:      {adm.mass:.5f}  (exact {m})")
for r, mr in zip(scenarios.adm_radii(metric), adm.masses):
    print(f"    sphere r = {r:.2f}: {mr:.5f}")

ext = scenarios.exterior_mass(m, 48, r_in=1.0, truncations=(4.0, 8.0))
print(f"exterior solves, extrapolated:     {ext['mass']:.5f}")

by = brown_york(metric, sc.oracle["horizon_radius"], path="radial")
print(f"horizon Brown-York / (16 pi m):    {by.m_by / (16 * np.pi * m):.8f}")
print(f"    embedding cross-check:          {by.cross_check / (16 * np.pi * m):.8f}")
