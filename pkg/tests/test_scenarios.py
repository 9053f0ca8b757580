import json
import math
import warnings

import numpy as np
import pytest
import sympy as sp

from massbounds import scenarios as S
from massbounds.acceptance import SPHEROID_06
from massbounds.bounds import minkowski_checks
from massbounds.errors import ExtrapolationUnreliable
from massbounds.mass import adm_mass
from massbounds.mass import surface_functionals
from massbounds.metric import scalar_curvature


def test_bump_tail_coefficient():
    r = sp.symbols("r", positive=True)
    assert S.BUMP_TAIL == pytest.approx(float(sp.integrate((1 - r ** 2) ** 4 * r ** 2, (r, 0, 1))),
                                        rel=1e-15)
    val, d1, lap = S.bump_derivatives(np.array([0.0, 0.5, 1.0, 2.0]))
    np.testing.assert_allclose(val, [1.0, 0.75 ** 4, 0.0, 0.0])
    assert lap[0] == -24.0 and d1[2] == 0.0


def test_registry_and_lookup():
    names = list(S.REGISTRY)
    assert len(names) == len(set(names)) == 13
    assert set(S.DIAGNOSTICS).isdisjoint(names)
    with pytest.raises(KeyError, match="available"):
        S.get("no-such-scenario")
    sc = S.get("unit-sphere")
    json.dumps(sc.manifest())


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_schwarzschild_horizon_oracle_scales_with_mass(m):
    o = S.schwarzschild(m).oracle
    assert o["horizon_H"] == pytest.approx(0.0, abs=1e-15)
    assert o["horizon_m_by"] == pytest.approx(16 * np.pi * m, rel=1e-15)
    assert o["horizon_areal_radius"] == pytest.approx(2 * m)


def test_schwarzschild_rejects_nonpositive_mass():
    with pytest.raises(ValueError):
        S.schwarzschild(0.0)


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_example1_has_nonpositive_curvature_and_negative_mass(eps):
    sc = S.example1(eps)
    r = np.linspace(0, 2, 401)
    assert np.all(sc.profile.scalar_curvature(r) <= 0)
    assert sc.oracle["mass"] == pytest.approx(-2 * eps * S.BUMP_TAIL, rel=1e-10)
    assert sc.oracle["A"] == pytest.approx(S.BUMP_TAIL, rel=1e-10)
    assert sc.oracle["int_R_plus"] == 0.0 and sc.oracle["int_R_minus"] > 0


def test_example1_negative_curvature_is_small_against_sobolev_constant():
    b1 = S.example1(0.01).oracle["beta_q"]
    b2 = S.example1(0.02).oracle["beta_q"]
    assert b1 / S.SOBOLEV_FLAT < 0.05
    assert b2 / b1 == pytest.approx(2.0, rel=2e-2)


def test_example1_rejects_nonpositive_conformal_factor():
    with pytest.raises(ValueError, match="not positive"):
        S.example1(12.0)


def test_conformal_identity_closes_on_radial_oracle():
    o = S.example1(0.1).oracle
    residual = 2 * np.pi * o["mass"] - o["int_R_over_8"] + o["dirichlet_v"]
    assert abs(residual) < 1e-12 * o["dirichlet_v"] * 1e3
    # int R/8 dV_g equals -int u Delta_0 u dV_e
    assert o["int_R_over_8"] == pytest.approx(o["minus_int_u_lap"], rel=1e-10)


def test_matter_bump_has_positive_mass():
    sc = S.matter_bump(0.1)
    assert sc.oracle["mass"] > 0 and sc.oracle["int_R_minus"] == 0.0


def test_example2_composition():
    base = S.example1(0.1)
    sc = S.example2(base=base)
    o = sc.oracle
    assert o["mass"] == base.oracle["mass"] < 0
    assert o["int_R"] > 0
    assert S.RescaledBump(base.profile, o["threshold"]).total_scalar_curvature() == \
        pytest.approx(0.0, abs=1e-9)
    assert sc.params["a"] == pytest.approx(2 * o["threshold"])
    r = np.linspace(1.0, 3.0, 50)
    np.testing.assert_allclose(sc.profile.u(r), base.profile.u(r), rtol=1e-15)
    with pytest.raises(ValueError, match="negative mass"):
        S.example2(base=S.matter_bump(0.1))


def test_example2_grid_mass_equals_base_mass():
    sc = S.get("example2")
    metric = sc.build(32)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationUnreliable)
        adm = adm_mass(metric, S.adm_radii(metric))
    assert adm.mass == pytest.approx(sc.oracle["mass"], rel=sc.tolerances["mass_rel"])


def test_exact_scalar_curvature_agrees_with_finite_differences():
    sc = S.matter_bump(0.1)
    errs = []
    for n in (32, 64):
        metric = sc.build(n)
        diff = np.abs(S.exact_scalar_curvature(metric).values - scalar_curvature(metric).values)
        errs.append(np.max(diff[(slice(2, -2),) * 3]))
    assert errs[0] / errs[1] > 3.5
    assert errs[1] < 0.01 * 0.7612          # peak |R| is 0.7612


def test_s3_cap_oracles():
    sc = S.s3_cap(1.0, 1.2)
    p = sc.profile
    r0 = sc.oracle["r0"]
    assert p.scalar_curvature(np.array([0.3]))[0] == pytest.approx(6.0, rel=1e-12)
    assert float(p.areal_radius(r0)) == pytest.approx(math.sin(1.2), rel=1e-12)
    assert float(p.mean_curvature(r0)) == pytest.approx(sc.oracle["H"], rel=1e-12)
    assert "positive-mean-curvature" not in S.s3_cap(1.0, 1.58).expected


def test_euclidean_ball_margins_vanish():
    ev = S.evaluate(S.get("euclidean-ball-r1"), 20)
    asserted = [v for v in ev.verdicts if v.asserted]
    assert asserted and all(v.holds for v in asserted)
    for v in ev.verdicts:
        if v.applicable and v.margin is not None:
            assert abs(v.margin) < 1e-6


def test_compact_scenarios_hold_at_coarse_resolution():
    for name in ("matter-ball-eps0.1", "schwarzschild-annulus-m1", "s3-cap-chi1.58"):
        ev = S.evaluate(S.get(name), 20)
        assert any(v.asserted for v in ev.verdicts), name
        assert all(v.holds for v in ev.verdicts if v.asserted), name


def test_conformal_law_diagnostic():
    # a slightly negative scalar curvature: the solve energy is negative and
    # m_by equals 4 * flux, so the 1/4-normalized energy bound exceeds m_by
    sc = S.negative_bump_ball()
    o = sc.oracle
    assert o["m_by"] == pytest.approx(4 * o["flux"], rel=1e-14)
    ev = S.evaluate(sc, 20)
    v = next(v for v in ev.verdicts if v.theorem == "positive-mean-curvature")
    assert v.applicable
    assert v.details["energy"] < 0
    assert v.details["corrected_bound"] == pytest.approx(o["m_by"], rel=1e-4)
    assert v.bound > v.mass and v.holds is False


def test_spheroid_closed_forms_and_frozen_values():
    o = S.spheroid_surface(1.0, 0.6).oracle
    for k in ("area", "volume", "integral_H0"):
        assert o[k] == pytest.approx(o[k + "_closed"], rel=1e-12)
        assert o[k] == pytest.approx(SPHEROID_06[k], rel=1e-12)


def test_spheroid_margins_shrink_toward_the_sphere():
    margins = []
    for c in (0.6, 0.8, 0.9, 0.99, 1.0):
        v = minkowski_checks(surface_functionals(S.spheroid_surface(1.0, c).build()))
        margins.append((v.details["area_margin"], v.details["volume_margin"]))
    area, volume = zip(*margins)
    assert all(x > y for x, y in zip(area, area[1:]))
    assert all(x > y for x, y in zip(volume, volume[1:]))
    assert abs(area[-1]) < 1e-8 * 64 * np.pi ** 2


def test_evaluation_rejects_unknown_kind():
    sc = S.Scenario("odd", "nonsense", {}, {})
    with pytest.raises(ValueError):
        S.evaluate(sc, 8)
