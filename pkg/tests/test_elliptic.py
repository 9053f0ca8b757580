import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from massbounds.elliptic import (SOBOLEV_FLAT, EllipticProblem, aubin_talenti_quotient,
                                 first_dirichlet_eigenvalue, radial_ball_eigenvalue,
                                 radial_dirichlet, radial_potential, radial_shoot,
                                 sobolev_estimate, sobolev_lower_bound, solve_dirichlet,
                                 solve_exterior, sphere_average)
from massbounds.errors import NonCoerciveOperator
from massbounds.mesh import Grid3
from massbounds.metric import MetricField


def _sinh_exact(r):
    r = np.maximum(r, 1e-12)
    return np.sinh(r) / (r * np.sinh(1.0))


def test_constant_data_gives_constant_solution():
    g = Grid3.ball(1.0, 16)
    rep = solve_dirichlet(EllipticProblem(g))
    np.testing.assert_allclose(rep.u.values[g.inside], 1.0, atol=1e-9)
    assert rep.energy == pytest.approx(0.0, abs=1e-8)
    assert rep.iterations == len(rep.history) - 1
    assert rep.history_csv().startswith("iteration,residual\n")


def test_helmholtz_on_ball_converges_at_second_order():
    errs, energies = [], []
    for n in (16, 32):
        g = Grid3.ball(1.0, n)
        rep = solve_dirichlet(EllipticProblem(g, q=1.0))
        errs.append(np.max(np.abs(rep.u.values - _sinh_exact(g.radius))[g.inside]))
        energies.append(rep.energy)
        assert rep.residual_norm < 1e-9
        assert rep.energy == pytest.approx(rep.boundary_flux, rel=1e-10)
        assert not rep.flags
    assert errs[0] / errs[1] > 3.0 and errs[1] < 2e-4
    exact_energy = 4 * np.pi * (1 / np.tanh(1.0) - 1.0)
    e0, e1 = (abs(e - exact_energy) for e in energies)
    assert e0 / e1 > 3.0


def test_conformal_covariance_on_curved_ball():
    # for g = phi^4 delta, 1/phi solves Delta_g w - (R_g / 8) w = 0 exactly
    errs = []
    for n in (16, 32):
        g = Grid3.ball(1.0, n)
        r = g.radius
        phi = 1 + 0.2 * np.exp(-r ** 2)
        R = -8 * 0.2 * (4 * r ** 2 - 6) * np.exp(-r ** 2) / phi ** 5
        prob = EllipticProblem(g, metric=MetricField.conformal(g, phi), q=R / 8,
                               boundary=lambda p: 1 / (1 + 0.2 * np.exp(-np.sum(p * p, axis=1))))
        rep = solve_dirichlet(prob)
        errs.append(np.max(np.abs(rep.u.values - 1 / phi)[g.inside]))
    assert errs[0] / errs[1] > 3.0 and errs[1] < 2e-4


@given(st.floats(0.0, 20.0))
def test_maximum_principle_for_nonnegative_potential(c):
    g = Grid3.ball(1.0, 12)
    rep = solve_dirichlet(EllipticProblem(g, q=lambda p: c * (1 + p[..., 0] ** 2)))
    vals = rep.u.values[g.inside]
    assert vals.min() > 0 and vals.max() <= 1 + 1e-6      # iterative solve tolerance
    assert "max-principle-violated" not in rep.flags


def test_indefinite_operator_raises():
    with pytest.raises(NonCoerciveOperator):
        solve_dirichlet(EllipticProblem(Grid3.ball(1.0, 16), q=-30.0))


def test_problem_validation():
    g = Grid3.ball(1.0, 12)
    q = np.zeros(g.dims)
    q[g.inside.nonzero()[0][0], g.inside.nonzero()[1][0], g.inside.nonzero()[2][0]] = np.nan
    with pytest.raises(ValueError, match="not finite"):
        EllipticProblem(g, q=q)
    with pytest.raises(ValueError, match="different grid"):
        EllipticProblem(g, metric=MetricField.flat(Grid3.ball(1.0, 14)))


def test_discrete_eigenvalue_of_ball():
    lams = [first_dirichlet_eigenvalue(Grid3.ball(1.0, n)).lam for n in (16, 32)]
    e0, e1 = (abs(lam - np.pi ** 2) for lam in lams)
    assert e1 < 2e-3 * np.pi ** 2 and e0 / e1 > 3.0


def test_eigenvalue_shifts_with_constant_potential():
    g = Grid3.ball(1.0, 16)
    base = first_dirichlet_eigenvalue(g).lam
    shifted = first_dirichlet_eigenvalue(g, q=2.5).lam
    assert shifted - base == pytest.approx(2.5, rel=1e-8)


def test_radial_shooting_oracles():
    assert radial_ball_eigenvalue(1.0) == pytest.approx(np.pi ** 2, rel=1e-11)
    assert radial_ball_eigenvalue(2.0, q=lambda r: 1.0) == pytest.approx(np.pi ** 2 / 4 + 1,
                                                                         rel=1e-11)
    u = radial_dirichlet(lambda r: 1.0, 1.0)
    r = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(u(r), _sinh_exact(r), rtol=1e-9)
    with pytest.raises(ArithmeticError):
        radial_shoot(lambda r, y: 1e4 * y * y, 0.0, 10.0, 1.0)


def test_radial_potential_of_uniform_density():
    v, A = radial_potential(lambda r: 1.0, 1.0, 3.0)
    assert A == pytest.approx(1 / 3, rel=1e-12)
    # v = r^2/6 - 1/2 inside, -1/(3r) outside
    np.testing.assert_allclose(v(np.array([0.0, 0.5, 2.0])), [-0.5, 0.125 / 3 - 0.5, -1 / 6],
                               rtol=1e-9)
    np.testing.assert_allclose(v.derivative(np.array([0.5, 2.0])), [0.5 / 3, 1 / 12], rtol=1e-8)


def test_aubin_talenti_quotient_approaches_sharp_constant():
    qs = [aubin_talenti_quotient(s, 1.0, 2.0) for s in (0.1, 0.03, 0.01)]
    assert all(q > SOBOLEV_FLAT for q in qs)
    assert qs[0] > qs[1] > qs[2]
    assert qs[2] == pytest.approx(SOBOLEV_FLAT, rel=3e-2)


def test_sobolev_estimate_brackets_flat_constant():
    est = sobolev_estimate(Grid3.ball(1.0, 12))
    assert est.lower == SOBOLEV_FLAT
    assert est.minimized > SOBOLEV_FLAT
    g = Grid3.ball(1.0, 12)
    u = 1 + 0.5 * g.radius
    assert sobolev_lower_bound(MetricField.conformal(g, u)) == pytest.approx(
        (1 / u[g.inside].max()) ** 2 * SOBOLEV_FLAT)
    assert sobolev_lower_bound(MetricField.conformal(g, u).as_general()) is None


def test_sphere_average_of_linear_plus_constant():
    g = Grid3.cube(2.0, 16)
    x, y, z = g.coords
    # scipy solves for the cubic spline coefficients iteratively
    assert sphere_average(g, 3.0 + x + 2 * z, 1.3) == pytest.approx(3.0, abs=1e-5)


def test_exterior_solve_recovers_harmonic_tail():
    # u = 1 + 0.5/r is harmonic with u = 1.5 on the unit sphere; mass 2 A b = 1
    rep = solve_exterior(truncations=(4.0, 8.0), cells=32, excision_radius=1.0,
                         inner_boundary=1.5)
    ext = rep.extrapolation
    assert ext["regime"] == "b=1"
    assert ext["b"] == pytest.approx(1.0, abs=3e-2)
    assert ext["mass"] == pytest.approx(1.0, rel=6e-2)
    with pytest.raises(ValueError):
        solve_exterior(truncations=(8.0, 4.0))


def test_amg_preconditioner_matches_jacobi():
    pytest.importorskip("pyamg")
    g = Grid3.ball(1.0, 16)
    prob = EllipticProblem(g, q=1.0)
    a = solve_dirichlet(prob, precond="amg")
    b = solve_dirichlet(prob)
    np.testing.assert_allclose(a.u.values, b.u.values, atol=1e-8)
    assert a.iterations < b.iterations
