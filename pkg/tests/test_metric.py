import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _sympy_curvature import conformal_oracle
from massbounds.mesh import Grid3, ScalarField
from massbounds.metric import (MetricField, curvature_suite, fit_decay,
                               mean_curvature_level_set, scalar_curvature,
                               sign_split_and_lp)
from massbounds.scenarios import schwarzschild_profile

BLOB = "1 + 0.3*exp(-(x**2 + 2*y**2 + 3*z**2)/2)"


def _blob_metric(n):
    g = Grid3.cube(2.0, n)
    x, y, z = g.coords
    return MetricField.conformal(g, 1 + 0.3 * np.exp(-(x ** 2 + 2 * y ** 2 + 3 * z ** 2) / 2))


def _errors(path, n):
    m = _blob_metric(n)
    fR, fRm = conformal_oracle(BLOB)
    c = curvature_suite(m, path=path)
    x, y, z = m.grid.coords
    v = c.valid
    return (np.max(np.abs(c.R.values - fR(x, y, z))[v]),
            np.max(np.abs(c.riemann_norm_sq.values - fRm(x, y, z))[v]))


@pytest.mark.parametrize("path", ["conformal", "general"])
def test_curvature_matches_symbolic_riemann_at_second_order(path):
    coarse, fine = _errors(path, 24), _errors(path, 48)
    for c, f in zip(coarse, fine):
        assert c / f > 3.5
    assert fine[1] < 0.05 * 5.2     # |Rm|^2 peaks near 5.2


def test_symbolic_oracle_reproduces_schwarzschild_kretschmann():
    _, fRm = conformal_oracle("1 + 1/(2*sqrt(x**2 + y**2 + z**2))")
    r = 3.0
    rho = (1 + 1 / (2 * r)) ** 2 * r
    assert float(fRm(r, 0.0, 0.0)) == pytest.approx(24.0 / rho ** 6, rel=1e-12)


def test_flat_metric_has_no_curvature():
    g = Grid3.cube(1.0, 12)
    c = curvature_suite(MetricField.flat(g).as_general())
    assert np.max(np.abs(c.riemann_norm_sq.values)) == 0.0
    assert c.sup_riemann() == 0.0


def test_scalar_curvature_paths_agree():
    m = _blob_metric(32)
    a = scalar_curvature(m, "conformal").values
    b = scalar_curvature(m.as_general()).values
    inner = (slice(3, -3),) * 3
    assert np.max(np.abs(a - b)[inner]) < 0.2
    with pytest.raises(ValueError):
        scalar_curvature(m.as_general(), "conformal")


def test_metric_validation():
    g = Grid3.cube(1.0, 8)
    with pytest.raises(ValueError, match="not finite or"):
        MetricField.conformal(g, np.zeros(g.dims))
    bad = np.ones(g.dims)
    bad[4, 4, 4] = np.inf
    with pytest.raises(ValueError):
        MetricField.conformal(g, bad)
    comps = np.zeros((3, 3) + g.dims)
    comps[0, 1] = 1.0
    with pytest.raises(ValueError, match="symmetric"):
        MetricField.general(g, comps)
    with pytest.raises(ValueError):
        MetricField(g, u=np.ones(g.dims), n=4)


@given(st.floats(0.1, 10.0))
def test_scaling_multiplies_volume(c):
    g = Grid3.cube(1.0, 8)
    m = MetricField.conformal(g, 1.0 + 0.1 * g.radius)
    np.testing.assert_allclose(m.scaled(c).volume_factor, c ** 3 * m.volume_factor, rtol=1e-12)
    np.testing.assert_allclose(m.as_general().scaled(c).volume_factor,
                               c ** 3 * m.volume_factor, rtol=1e-12)


def test_schwarzschild_profile_horizon():
    p = schwarzschild_profile(1.0)
    assert p.mean_curvature(0.5) == pytest.approx(0.0, abs=1e-15)
    assert p.areal_radius(0.5) == pytest.approx(2.0)
    assert p.area(0.5) == pytest.approx(16 * np.pi)
    # distance from the horizon is positive and grows with the outer radius
    assert 0 < p.distance(0.5, 1.0) < p.distance(0.5, 2.0)


@pytest.mark.parametrize("general", [False, True])
def test_level_set_mean_curvature_grid_path(general):
    p = schwarzschild_profile(1.0)
    g = Grid3.cube(4.0, 48, excision_radius=0.4)
    m = MetricField.conformal(g, p.u(np.maximum(g.radius, 0.1)))
    if general:
        m = m.as_general()
    lc = mean_curvature_level_set(m, 2.0)
    assert lc.H_min == pytest.approx(p.mean_curvature(2.0), rel=3e-2)
    assert lc.H.max() == pytest.approx(p.mean_curvature(2.0), rel=3e-2)
    assert lc.area == pytest.approx(p.area(2.0), rel=1e-5)
    with pytest.raises(ValueError, match="not resolved"):
        mean_curvature_level_set(m, 3.9)


def test_level_set_grid_path_finite_through_origin():
    errs = []
    for n in (16, 32):
        lc = mean_curvature_level_set(MetricField.flat(Grid3.cube(2.0, n)), 1.0)
        assert np.all(np.isfinite(lc.H))
        errs.append(np.max(np.abs(lc.H - 2.0)))
    assert errs[1] < 2e-2 and errs[1] < errs[0] / 3


def test_sign_split_constants_of_step_potential():
    g = Grid3.ball(1.0, 32)
    q = ScalarField(g, np.where(g.radius < 0.5, -2.0, 1.0))
    s = sign_split_and_lp(q)
    small = np.pi / 6
    assert s.alpha == 2.0
    assert s.beta == pytest.approx(2 * small ** (2 / 3), rel=2e-2)
    assert s.delta == pytest.approx((4 * np.pi / 3 - small) ** (2 / 3), rel=2e-2)
    # the domain has volume above one, so the largest tabulated exponent wins
    assert s.gamma_p == 64.0 and s.gamma < s.alpha
    assert s.gamma_is_estimate


def test_sign_split_includes_sup_on_small_domains():
    g = Grid3.ball(0.5, 24)
    s = sign_split_and_lp(ScalarField(g, -np.ones(g.dims)))
    assert s.gamma == s.alpha == 1.0 and s.gamma_p == np.inf


@given(st.floats(-5, 5), st.floats(0.5, 2.0))
def test_fit_decay_recovers_exact_models(A, b):
    r = np.linspace(5, 20, 30)
    d = fit_decay(b + A / r, r)
    assert d.A == pytest.approx(A, abs=1e-9)
    assert d.b == pytest.approx(b, abs=1e-10)
    assert d.C < 1e-7
