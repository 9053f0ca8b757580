"""Metric fields, curvature, sign splits with L^p functionals, and mean curvature.

Two representations are supported:

* conformally flat ``g = u^4 delta`` storing only ``u`` (the fast path), and
* general symmetric ``g_ij`` sampled on the grid.

Curvature is computed in three dimensions only.  There the Weyl tensor
vanishes, so the full Riemann tensor is fixed by Ricci and ``R``, which gives

    |Rm|^2 = 4 |Ric|^2 - R^2,     |grad Rm|^2 = 4 |grad Ric|^2 - |grad R|^2

with all norms taken in ``g``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from massbounds.mesh import Grid3, ScalarField, integrate, laplacian_flat, second_derivative

P_GRID = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0)
U_FLOOR = 1e-8


class MetricField:
    """Riemannian metric sampled on a :class:`Grid3`.

    Use :meth:`conformal` or :meth:`general` to construct.

    Attributes
    ----------
    grid : Grid3
    u : ndarray or None
        Conformal factor when ``g = u^4 delta``.
    profile : RadialProfile or None
        Exact radial conformal factor when the metric came from one; enables
        closed-form level-set quantities.
    """

    def __init__(self, grid: Grid3, u=None, components=None, profile=None, n: int = 3):
        if n != 3:
            raise ValueError("only three-dimensional metrics are supported")
        self.grid = grid
        self.n = n
        self.profile = profile
        if u is not None:
            u = np.asarray(u, dtype=float)
            if u.shape != grid.dims:
                raise ValueError("conformal factor has wrong shape")
            bad = grid.inside & ~((u > U_FLOOR) & np.isfinite(u))
            if np.any(bad):
                node = tuple(int(i) for i in np.argwhere(bad)[0])
                raise ValueError(f"conformal factor not finite or <= {U_FLOOR} at node {node}")
            self.u = u
            self._g = None
        else:
            g = np.asarray(components, dtype=float)
            if g.shape != (3, 3) + tuple(grid.dims):
                raise ValueError("metric components must have shape (3, 3, *dims)")
            if not np.allclose(g, np.swapaxes(g, 0, 1)):
                raise ValueError("metric components are not symmetric")
            lam = np.linalg.eigvalsh(np.moveaxis(g, (0, 1), (-2, -1)))[..., 0]
            bad = grid.inside & ~(lam > 0)
            if np.any(bad):
                node = tuple(int(i) for i in np.argwhere(bad)[0])
                raise ValueError(f"metric is not positive definite at node {node}")
            self.u = None
            self._g = g

    @classmethod
    def conformal(cls, grid: Grid3, u, profile=None) -> "MetricField":
        return cls(grid, u=u, profile=profile)

    @classmethod
    def general(cls, grid: Grid3, components) -> "MetricField":
        return cls(grid, components=components)

    @classmethod
    def flat(cls, grid: Grid3) -> "MetricField":
        return cls(grid, u=np.ones(grid.dims))

    @classmethod
    def from_profile(cls, grid: Grid3, profile: "RadialProfile") -> "MetricField":
        return cls(grid, u=profile.u(grid.radius), profile=profile)

    @property
    def is_conformal(self) -> bool:
        return self.u is not None

    @property
    def components(self) -> np.ndarray:
        if self._g is not None:
            return self._g
        return self.u ** 4 * np.eye(3)[:, :, None, None, None]

    def as_general(self) -> "MetricField":
        return MetricField.general(self.grid, self.components)

    @property
    def inverse(self) -> np.ndarray:
        if self.u is not None:
            return self.u ** -4 * np.eye(3)[:, :, None, None, None]
        g = np.moveaxis(self._g, (0, 1), (-2, -1))
        return np.moveaxis(np.linalg.inv(g), (-2, -1), (0, 1))

    @property
    def volume_factor(self) -> np.ndarray:
        if self.u is not None:
            return self.u ** 6
        g = np.moveaxis(self._g, (0, 1), (-2, -1))
        return np.sqrt(np.linalg.det(g))

    @property
    def density_inverse(self) -> np.ndarray:
        """``sqrt(g) g^{ij}``, the coefficient tensor of the divergence-form Laplacian."""
        return self.volume_factor * self.inverse

    def scaled(self, c: float) -> "MetricField":
        """The metric ``c^2 g``."""
        if self.u is not None:
            return MetricField.conformal(self.grid, self.u * np.sqrt(c))
        return MetricField.general(self.grid, c * c * self._g)


@dataclass(frozen=True)
class RadialProfile:
    """Radial conformal factor ``u(r)`` with its first two derivatives.

    Derivatives must be supplied analytically; ``lap`` is the flat Laplacian
    ``u'' + 2 u'/r``.
    """

    u: Callable[[np.ndarray], np.ndarray]
    du: Callable[[np.ndarray], np.ndarray]
    lap: Callable[[np.ndarray], np.ndarray]
    name: str = "radial"

    def scalar_curvature(self, r):
        return -8.0 * self.lap(r) / self.u(r) ** 5

    def mean_curvature(self, r):
        """Mean curvature of the coordinate sphere of radius ``r`` (outward)."""
        u = self.u(r)
        return 2.0 / u ** 2 * (1.0 / r + 2.0 * self.du(r) / u)

    def area(self, r):
        return 4.0 * np.pi * self.u(r) ** 4 * r * r

    def areal_radius(self, r):
        return self.u(r) ** 2 * r

    def distance(self, r, r_outer):
        """Metric distance from the sphere of radius ``r`` to that of ``r_outer``."""
        from scipy.integrate import quad

        return quad(lambda t: float(self.u(t)) ** 2, r, r_outer, epsabs=1e-13, epsrel=1e-12)[0]


@dataclass
class DecayModel:
    """Fitted asymptotics ``u - 1 ~ b - 1 + A / r``.

    Attributes
    ----------
    A : float
        Coefficient of ``1/r``.
    b : float
        Limit at infinity.
    order : int
        Asserted decay exponent of the remainder beyond ``1/r`` (default n - 2).
    C : float
        Smallest constant with ``|u - b - A/r| <= C r^-2`` on the sampled shells.
    """

    A: float
    b: float = 1.0
    order: int = 1
    C: float = 0.0


def fit_decay(values: np.ndarray, radii: np.ndarray) -> DecayModel:
    """Least-squares fit of ``b + A/r`` to samples, with the remainder constant."""
    radii = np.asarray(radii, dtype=float).ravel()
    values = np.asarray(values, dtype=float).ravel()
    X = np.stack([np.ones_like(radii), 1.0 / radii], axis=1)
    (b, A), *_ = np.linalg.lstsq(X, values, rcond=None)
    rem = np.abs(values - b - A / radii) * radii ** 2
    return DecayModel(A=float(A), b=float(b), C=float(rem.max()))


@dataclass
class CurvatureFields:
    """Curvature carriers on a grid.

    ``valid`` marks nodes far enough from the box faces for the stencils
    (three layers for third derivatives).
    """

    R: ScalarField
    ricci: np.ndarray = field(repr=False)
    riemann_norm_sq: ScalarField = field(repr=False)
    grad_riemann_norm_sq: ScalarField = field(repr=False)
    valid: np.ndarray = field(repr=False)

    def sup_riemann(self) -> float:
        return float(np.sqrt(np.max(self.riemann_norm_sq.values[self.valid])))

    def shell_csv(self, edges: Sequence[float]) -> str:
        """Shell-averaged R, |Rm|^2 and |grad Rm|^2 as CSV rows (r_mid, ...)."""
        out = io.StringIO()
        out.write("r,R,riemann_norm_sq,grad_riemann_norm_sq\n")
        for r, vals in shell_average(
                [self.R, self.riemann_norm_sq, self.grad_riemann_norm_sq], edges, self.valid):
            out.write(f"{r:.12g}," + ",".join(f"{v:.12g}" for v in vals) + "\n")
        return out.getvalue()


def shell_average(fields: Sequence[ScalarField], edges: Sequence[float], mask=None):
    """Average each field over radial shells ``edges[k] <= r < edges[k+1]``."""
    grid = fields[0].grid
    r = grid.radius
    w = grid.weights if mask is None else grid.weights * mask
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (r >= lo) & (r < hi) & (w > 0)
        if not np.any(sel):
            continue
        ws = w[sel]
        rows.append((0.5 * (lo + hi),
                     [float(np.sum(f.values[sel] * ws) / np.sum(ws)) for f in fields]))
    return rows


def _grad(a, h):
    return np.stack(np.gradient(a, h, edge_order=2), axis=0)


def scalar_curvature(metric: MetricField, path: str = "auto") -> ScalarField:
    """Scalar curvature.

    ``path="conformal"`` uses ``R = -8 u^-5 Delta_0 u``; ``"general"``
    differentiates Christoffel symbols.  ``"auto"`` picks the conformal path
    when the metric stores ``u``.
    """
    grid = metric.grid
    if path == "auto":
        path = "conformal" if metric.is_conformal else "general"
    if path == "conformal":
        if not metric.is_conformal:
            raise ValueError("conformal path needs a conformal metric")
        lap = laplacian_flat(ScalarField(grid, metric.u)).values
        return ScalarField(grid, -8.0 * lap / metric.u ** 5, metric.volume_factor)
    g = metric.components
    ginv = metric.inverse
    gamma = christoffel(g, ginv, grid.h)
    ric = _ricci_general(gamma, grid.h)
    R = np.einsum("ij...,ij...->...", ginv, ric)
    return ScalarField(grid, R, metric.volume_factor)


def christoffel(g, ginv, h):
    """``Gamma^k_ij`` with shape (3, 3, 3, *dims), index order (k, i, j)."""
    dg = np.stack([_grad(g[i, j], h) for i in range(3) for j in range(3)])
    dg = dg.reshape((3, 3, 3) + g.shape[2:])          # dg[i, j, l] = d_l g_ij
    # lowered: Gamma_lij = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    low = 0.5 * (np.einsum("jli...->lij...", dg) + np.einsum("ilj...->lij...", dg)
                 - dg.transpose((2, 0, 1) + tuple(range(3, dg.ndim))))
    return np.einsum("kl...,lij...->kij...", ginv, low)


def _ricci_general(gamma, h):
    # R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik
    div = sum(np.gradient(gamma[k], h, axis=k + 2, edge_order=2) for k in range(3))
    trace = np.einsum("kik...->i...", gamma)
    dtrace = np.stack([_grad(trace[i], h) for i in range(3)])   # dtrace[i, j] = d_j G^k_ik
    term3 = np.einsum("kkl...,lij...->ij...", gamma, gamma)
    term4 = np.einsum("kjl...,lik...->ij...", gamma, gamma)
    return div - dtrace + term3 - term4


def _conformal_geometry(u, h):
    """Christoffels and Ricci of ``u^4 delta`` from derivatives of ``u``."""
    du = _grad(u, h)
    hess = np.empty((3, 3) + u.shape)
    for i in range(3):
        hess[i, i] = second_derivative(u, h, i)
        for j in range(i + 1, 3):
            hess[i, j] = hess[j, i] = np.gradient(du[i], h, axis=j, edge_order=2)
    df = 2.0 * du / u
    ddf = 2.0 * hess / u - 2.0 * du[:, None] * du[None, :] / u ** 2
    lapf = np.trace(ddf)
    grad2 = np.sum(df * df, axis=0)
    eye = np.eye(3)[:, :, None, None, None]
    ric = -(ddf - df[:, None] * df[None, :]) - (lapf + grad2) * eye
    gamma = (np.einsum("ki,j...->kij...", np.eye(3), df)
             + np.einsum("kj,i...->kij...", np.eye(3), df)
             - np.einsum("ij,k...->kij...", np.eye(3), df))
    return gamma, ric


def curvature_suite(metric: MetricField, path: str = "auto") -> CurvatureFields:
    """Scalar curvature, Ricci, ``|Rm|^2`` and ``|grad Rm|^2``.

    Parameters
    ----------
    path : {"auto", "conformal", "general"}
        The conformal path differentiates ``u`` directly; the general path
        differentiates the metric components.
    """
    grid = metric.grid
    if min(grid.dims) < 2 * 3 + 2:
        raise ValueError("grid too small after trimming three layers per side")
    if path == "auto":
        path = "conformal" if metric.is_conformal else "general"
    h = grid.h
    ginv = metric.inverse
    if path == "conformal":
        gamma, ric = _conformal_geometry(metric.u, h)
    else:
        gamma = christoffel(metric.components, ginv, h)
        ric = _ricci_general(gamma, h)
    R = np.einsum("ij...,ij...->...", ginv, ric)
    ric_up = np.einsum("ia...,jb...,ab...->ij...", ginv, ginv, ric)
    ric_sq = np.einsum("ij...,ij...->...", ric_up, ric)
    rm_sq = 4.0 * ric_sq - R * R
    # covariant derivative of Ricci: D_k R_ij = d_k R_ij - G^l_ki R_lj - G^l_kj R_il
    dric = np.stack([np.stack([_grad(ric[i, j], h) for j in range(3)]) for i in range(3)])
    nabla = (np.einsum("ijk...->kij...", dric)
             - np.einsum("lki...,lj...->kij...", gamma, ric)
             - np.einsum("lkj...,il...->kij...", gamma, ric))
    nabla_up = np.einsum("ka...,ib...,jc...,abc...->kij...", ginv, ginv, ginv, nabla)
    nabla_sq = np.einsum("kij...,kij...->...", nabla_up, nabla)
    dR = _grad(R, h)
    dR_sq = np.einsum("ij...,i...,j...->...", ginv, dR, dR)
    grad_rm_sq = 4.0 * nabla_sq - dR_sq
    valid = np.zeros(grid.dims, dtype=bool)
    valid[3:-3, 3:-3, 3:-3] = True
    valid &= grid.inside
    if not np.any(valid):
        raise ValueError("no nodes remain after trimming")
    vf = metric.volume_factor
    return CurvatureFields(
        R=ScalarField(grid, R, vf),
        ricci=ric,
        riemann_norm_sq=ScalarField(grid, np.maximum(rm_sq, 0.0), vf),
        grad_riemann_norm_sq=ScalarField(grid, np.maximum(grad_rm_sq, 0.0), vf),
        valid=valid,
    )


@dataclass
class SignSplit:
    """Positive/negative parts of a potential and the constants built from them.

    ``gamma`` is the maximum over a finite set of exponents and is therefore a
    lower estimate of the supremum over all ``p >= 1``
    (``gamma_is_estimate`` is always True).
    """

    q_plus: ScalarField
    q_minus: ScalarField
    alpha: float
    beta: float
    gamma: float
    delta: float
    gamma_p: float
    gamma_is_estimate: bool = True


def sign_split_and_lp(q: ScalarField, p_list: Sequence[float] = P_GRID,
                      metric: MetricField | None = None) -> SignSplit:
    """Split ``q = q+ - q-`` and compute alpha, beta, gamma, delta.

    ``alpha = sup q-``, ``beta = ||q-||_{3/2}``, ``delta = ||q+||_{3/2}`` and
    ``gamma = max_p ||q-||_p`` over ``p_list``; ``alpha`` itself joins the
    candidates when the domain has volume at most one (the ``p -> inf``
    limit of ``||q-||_p`` is then approached from below).
    """
    qp = q.positive_part()
    qm = q.negative_part()

    def norm(f, p):
        return integrate(f.with_values(f.values ** p), metric) ** (1.0 / p)

    alpha = qm.sup() if np.any(q.support) else 0.0
    beta = norm(qm, 1.5)
    delta = norm(qp, 1.5)
    cands = [(norm(qm, p), p) for p in p_list]
    vol = integrate(q.with_values(np.ones(q.grid.shape)), metric)
    if vol <= 1.0:
        cands.append((alpha, np.inf))
    gamma, gp = max(cands, key=lambda t: t[0])
    return SignSplit(qp, qm, float(alpha), float(beta), float(gamma), float(delta), float(gp))


@dataclass
class LevelSetCurvature:
    """Mean curvature on a level set: samples, extremes and metric area."""

    H: np.ndarray
    H_min: float
    H_plus: float
    area: float
    radius: float


def _sphere_points(r, n_theta=24, n_phi=48):
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    ct = x[:, None] * np.ones((1, n_phi))
    st = np.sqrt(1 - ct * ct)
    pts = r * np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=-1)
    w = wx[:, None] * (2 * np.pi / n_phi) * r * r * np.ones((1, n_phi))
    return pts.reshape(-1, 3), w.ravel()


def interpolator(grid: Grid3, values: np.ndarray, method="cubic"):
    return RegularGridInterpolator(tuple(grid.axis(a) for a in range(3)), values,
                                   method=method, bounds_error=True)


def mean_curvature_level_set(metric: MetricField, radius: float, path: str = "auto",
                             n_theta: int = 24, n_phi: int = 48) -> LevelSetCurvature:
    """Mean curvature of the coordinate sphere ``|x| = radius`` (outward normal).

    ``path="radial"`` uses the closed form for a radial conformal factor and
    needs ``metric.profile``.  ``path="grid"`` evaluates
    ``H = (1/sqrt g) d_i (sqrt g nu^i)`` by finite differences with the unit
    normal ``nu^i = g^ij d_j r / |dr|_g`` and interpolates it to the sphere.
    """
    grid = metric.grid
    if path == "auto":
        path = "radial" if metric.profile is not None else "grid"
    if path == "radial":
        p = metric.profile
        H = float(p.mean_curvature(radius))
        return LevelSetCurvature(np.array([H]), H, max(H, 0.0), float(p.area(radius)), radius)
    lo = min(grid.axis(a)[0] for a in range(3))
    hi = max(grid.axis(a)[-1] for a in range(3))
    margin = 3 * grid.h
    r_ex = grid.excision_radius or 0.0
    r_out = grid.outer_radius if grid.outer_radius is not None else np.inf
    if not (r_ex + margin < radius < min(-lo, hi, r_out + 2 * grid.h) - margin):
        raise ValueError(f"sphere of radius {radius} is not resolved inside the grid")
    x = np.stack(grid.coords)
    r = grid.radius
    dr = x / np.where(r > 0, r, 1.0)
    dr[2][r == 0] = 1.0             # any unit covector keeps the origin node finite
    ginv = metric.inverse
    sqrtg = metric.volume_factor
    nu = np.einsum("ij...,j...->i...", ginv, dr)
    norm = np.sqrt(np.einsum("i...,i...->...", nu, dr))
    nu = nu / norm
    div = sum(np.gradient(sqrtg * nu[i], grid.h, axis=i, edge_order=2) for i in range(3))
    Hf = div / sqrtg
    pts, w = _sphere_points(radius, n_theta, n_phi)
    Hs = interpolator(grid, Hf)(pts)
    dens = interpolator(grid, sqrtg * norm)(pts)    # area density relative to flat
    area = float(np.sum(w * dens))
    return LevelSetCurvature(Hs, float(Hs.min()), float(max(Hs.max(), 0.0)), area, radius)
