import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from massbounds.elliptic import SOBOLEV_FLAT
from massbounds.mesh import (Grid3, RadialGrid, ScalarField, check_finite,
                             extend_by_zero_and_sobolev_quotient, field_from_bytes,
                             field_to_csv, gradient, integrate, laplacian_flat)


def test_cube_layout():
    g = Grid3.cube(2.0, 16)
    assert g.dims == (17, 17, 17)
    assert g.h == pytest.approx(0.25)
    assert g.upper == pytest.approx((2.0, 2.0, 2.0))
    assert g.domain_volume == pytest.approx(64.0, rel=1e-14)
    assert not g.interior[0].any() and g.interior[8, 8, 8]


@pytest.mark.parametrize("kw", [dict(h=0.0), dict(dims=(4, 10, 10)),
                                dict(excision_radius=2.0, outer_radius=1.0)])
def test_grid_rejects_bad_parameters(kw):
    args = dict(origin=(0, 0, 0), h=0.1, dims=(10, 10, 10))
    args.update(kw)
    with pytest.raises(ValueError):
        Grid3(**args)


@pytest.mark.parametrize("n", [16, 32])
def test_cut_cell_volumes_of_ball_and_exterior(n):
    ball = Grid3.ball(1.0, n)
    assert ball.domain_volume == pytest.approx(4 * np.pi / 3, abs=5e-5)
    shell = Grid3.cube(2.0, n, excision_radius=1.0)
    assert shell.domain_volume == pytest.approx(64 - 4 * np.pi / 3, abs=5e-5)
    assert np.all(ball.weights[~ball.inside & (ball.radius > 1.0 + ball.h)] == 0)


def test_quadrature_is_second_order():
    errs = []
    for n in (16, 32):
        g = Grid3.cube(1.0, n)
        x, y, z = g.coords
        errs.append(abs(integrate(ScalarField(g, x * x + y * z)) - 8.0 / 3.0))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=1e-6)


def test_radial_grid_weights_integrate_ball_volume():
    rg = RadialGrid(0.0, 2.0, 2001)
    vol = integrate(ScalarField(rg, np.ones(rg.n)))
    assert vol == pytest.approx(4 * np.pi * 8 / 3, rel=1e-6)
    with pytest.raises(ValueError):
        RadialGrid(1.0, 0.5)


@given(arrays(float, (9, 9, 9), elements=st.floats(-1e3, 1e3)))
def test_sign_parts_recompose(vals):
    f = ScalarField(Grid3.cube(1.0, 8), vals)
    p, m = f.positive_part(), f.negative_part()
    assert np.all(p.values >= 0) and np.all(m.values >= 0)
    np.testing.assert_array_equal(p.values - m.values, vals)
    assert np.all(p.values * m.values == 0)


def test_values_are_read_only_and_shape_checked():
    g = Grid3.cube(1.0, 8)
    f = ScalarField(g, np.zeros(g.dims))
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros((3, 3, 3)))


def test_check_finite_names_node():
    g = Grid3.cube(1.0, 8)
    v = np.zeros(g.dims)
    v[1, 2, 3] = np.nan
    with pytest.raises(ValueError, match=r"\(1, 2, 3\)"):
        check_finite(ScalarField(g, v))


def test_derivatives_exact_on_quadratics():
    g = Grid3.cube(1.0, 10)
    x, y, z = g.coords
    f = ScalarField(g, 3 * x * x - y * y + 2 * x * z + z)
    np.testing.assert_allclose(laplacian_flat(f).values, 4.0, atol=1e-9)
    gx, gy, gz = gradient(f)
    np.testing.assert_allclose(gx, 6 * x + 2 * z, atol=1e-9)
    np.testing.assert_allclose(gz, 2 * x + 1, atol=1e-9)


def test_sobolev_quotient_of_compact_bump_exceeds_sharp_constant():
    g = Grid3.cube(3.0, 48)
    r = g.radius
    f = np.where(r < 2.5, (1 - (r / 2.5) ** 2) ** 3, 0.0)
    f[g.boundary_layer(2)] = 0.0
    q = extend_by_zero_and_sobolev_quotient(ScalarField(g, f))
    assert SOBOLEV_FLAT < q < 2 * SOBOLEV_FLAT
    with pytest.raises(ValueError):
        extend_by_zero_and_sobolev_quotient(ScalarField(g, np.ones(g.dims)))


def test_binary_round_trip_and_csv():
    g = Grid3.cube(1.0, 8, excision_radius=0.3)
    vals = np.random.default_rng(0).normal(size=g.dims)
    f = ScalarField(g, vals)
    back = field_from_bytes(f.to_bytes(), excision_radius=0.3)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, vals)
    with pytest.raises(ValueError):
        field_from_bytes(b"XXXX" + f.to_bytes()[4:])
    text = field_to_csv(f)
    assert text.startswith("x,y,z,value\n")
    assert text.count("\n") == 1 + int(g.inside.sum())
