"""Minkowski-type inequalities on flat spheroids.

For the unit sphere both inequalities are equalities.  Flattening the
spheroid ``(1, 1, c)`` makes the margins grow; the sweep shows they are
monotone in the eccentricity.
"""
import numpy as np

from massbounds import bounds
from massbounds.mass import SurfaceOfRevolution, surface_functionals

print(f"{'c':>6} {'(int H0)^2 - 16 pi A':>22} {'4A^4/9V^2 - (int H0)^2':>24}")
for c in np.linspace(1.0, 0.3, 8):
    sf = surface_functionals(SurfaceOfRevolution.spheroid(1.0, float(c)))
    v = bounds.minkowski_checks(sf, f"spheroid c={c:.2f}")
    m1, m2 = v.details["area_margin"], v.details["volume_margin"]
    print(f"{c:6.2f} {m1:22.6f} {m2:24.6f}   holds={v.holds}")
