import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from massbounds.errors import EmbeddingObstructed
from massbounds.mass import (InducedMetric2, SurfaceOfRevolution, adm_mass,
                             antiderivative_odd, brown_york, d_even, d_odd, integrate_odd,
                             latitude, reference_mean_curvature, surface_functionals,
                             weyl_embed_axisymmetric)
from massbounds.mesh import Grid3
from massbounds.metric import MetricField
from massbounds.scenarios import schwarzschild_profile


def _schwarzschild(m, L, n, excision=1.0):
    p = schwarzschild_profile(m)
    g = Grid3.cube(L, n, excision_radius=excision)
    return MetricField.conformal(g, p.u(np.maximum(g.radius, 0.5 * excision)), profile=p), p


def _by_closed_form(p, r):
    rho = p.areal_radius(r)
    return 8 * np.pi * rho * (1 - np.sqrt(1 - 2 * 1.0 / rho))


def test_adm_mass_conformal_path():
    metric, _ = _schwarzschild(1.0, 12.0, 48)
    res = adm_mass(metric, [6.0, 7.0, 8.0, 9.0])
    assert res.mass == pytest.approx(1.0, rel=1e-4)
    assert res.path == "conformal" and not res.flags
    assert res.normalization == pytest.approx(-1 / (2 * np.pi))
    with pytest.raises(ValueError):
        adm_mass(metric, [6.0])


def test_adm_mass_general_path_small_mass():
    # the metric-derivative flux carries O(m^2 / r) terms; small m isolates the linear part
    metric, _ = _schwarzschild(0.1, 12.0, 48)
    res = adm_mass(metric.as_general(), [6.0, 7.0, 8.0, 9.0])
    assert res.path == "general"
    assert res.mass == pytest.approx(0.1, rel=1e-3)


def test_adm_mass_general_path_error_is_quadratic_in_mass():
    rel = []
    for m in (1.0, 0.5):
        metric, _ = _schwarzschild(m, 12.0, 48)
        rel.append(abs(adm_mass(metric.as_general(), [6.0, 7.0, 8.0, 9.0]).mass / m - 1))
    assert rel[0] < 2e-2
    assert rel[0] / rel[1] == pytest.approx(4.0, rel=0.1)


def test_adm_mass_rescaled_asymptotics():
    metric, _ = _schwarzschild(1.0, 12.0, 48)
    # u -> b = 2 at infinity; in coordinates y = b^2 x the metric is asymptotically flat
    # with mass b^2 m
    doubled = MetricField.conformal(metric.grid, 2 * metric.u)
    assert adm_mass(doubled, [6.0, 7.0, 8.0, 9.0], scale=2.0).mass == pytest.approx(4.0, rel=1e-4)


def test_spectral_latitude_calculus():
    t = latitude(129)
    assert integrate_odd(np.sin(t)) == pytest.approx(2.0, rel=1e-13)
    np.testing.assert_allclose(d_odd(np.sin(3 * t)), 3 * np.cos(3 * t), atol=1e-10)
    np.testing.assert_allclose(d_even(np.cos(2 * t)), -2 * np.sin(2 * t), atol=1e-10)
    np.testing.assert_allclose(antiderivative_odd(np.sin(t)), 1 - np.cos(t), atol=1e-12)


@given(st.floats(0.2, 5.0))
def test_round_sphere_geometry(rho):
    ind = InducedMetric2.round(rho, 129)
    np.testing.assert_allclose(ind.gauss_curvature, rho ** -2, rtol=1e-8)
    surf = weyl_embed_axisymmetric(ind)
    np.testing.assert_allclose(reference_mean_curvature(surf), 2 / rho, rtol=1e-8)
    sf = surface_functionals(surf)
    assert sf.area == pytest.approx(4 * np.pi * rho ** 2, rel=1e-10)
    assert sf.volume == pytest.approx(4 * np.pi * rho ** 3 / 3, rel=1e-10)
    assert sf.integral_H0 == pytest.approx(8 * np.pi * rho, rel=1e-10)
    assert sf.convex


@pytest.mark.parametrize("c", [0.6, 1.0, 1.7])
def test_embedding_round_trip(c):
    s = SurfaceOfRevolution.spheroid(1.0, c)
    e = weyl_embed_axisymmetric(s.induced())
    np.testing.assert_allclose(e.f, s.f, atol=1e-12)
    np.testing.assert_allclose(e.z, s.z - s.z[0], atol=1e-12)


def test_reflection_and_translation_preserve_functionals():
    s = SurfaceOfRevolution.spheroid(1.0, 0.6)
    base = surface_functionals(s)
    for other in (s.reflected(), s.translated(3.0)):
        sf = surface_functionals(other)
        assert sf.area == pytest.approx(base.area, rel=1e-12)
        assert sf.integral_H0 == pytest.approx(base.integral_H0, rel=1e-12)


def test_embedding_obstructed_reports_interval():
    t = latitude()
    ind = InducedMetric2(t, np.full(len(t), 0.25), np.sin(t) ** 2)    # curvature 4, too little length
    with pytest.raises(EmbeddingObstructed) as info:
        weyl_embed_axisymmetric(ind)
    lo, hi = info.value.interval
    assert 0 < lo < hi < np.pi


def test_negative_curvature_rejected_and_nonconvex_warned():
    t = latitude()
    f = np.sin(t) * (0.5 + 0.5 * np.cos(t) ** 2)
    f[0] = f[-1] = 0.0
    peanut = SurfaceOfRevolution(t, f, -np.cos(t))
    assert peanut.induced().gauss_curvature.min() < 0
    with pytest.raises(ValueError, match="not positive"):
        weyl_embed_axisymmetric(peanut.induced())
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert not surface_functionals(peanut).convex
    assert caught


def test_induced_metric_validation():
    t = latitude(65)
    with pytest.raises(ValueError):
        InducedMetric2(t, np.zeros(65), np.sin(t) ** 2)
    assert InducedMetric2.round(1.0, 65).to_csv().startswith("theta,E,G\n")


def test_brown_york_schwarzschild_sphere_radial_and_grid():
    metric, p = _schwarzschild(1.0, 3.0, 48, excision=0.3)
    exact = _by_closed_form(p, 2.0)
    assert exact == pytest.approx(10 * np.pi)
    rad = brown_york(metric, 2.0)
    assert rad.path == "radial"
    assert rad.m_by == pytest.approx(exact, rel=1e-13)
    assert rad.cross_check == pytest.approx(exact, rel=1e-10)
    assert rad.m_by_physical == pytest.approx(exact / (8 * np.pi))
    grid = brown_york(MetricField.conformal(metric.grid, metric.u), 2.0, path="grid")
    assert grid.path == "grid"
    assert grid.m_by == pytest.approx(exact, rel=1e-3)


def test_brown_york_of_flat_sphere_vanishes():
    g = Grid3.cube(2.0, 24)
    assert abs(brown_york(MetricField.flat(g), 1.0, path="grid").m_by) < 0.05


def test_brown_york_rejects_non_axisymmetric_data():
    g = Grid3.cube(2.0, 24)
    x, y, z = g.coords
    metric = MetricField.conformal(g, 1 + 0.2 * np.exp(-((x - 0.8) ** 2 + y ** 2 + z ** 2)))
    with pytest.raises(ValueError, match="axially symmetric"):
        brown_york(metric, 1.0, path="grid")
