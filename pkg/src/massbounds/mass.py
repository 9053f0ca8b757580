"""ADM mass by flux integrals and Brown-York mass via axisymmetric embedding.

Axisymmetric surfaces are handled spectrally on the latitude grid
``theta_k = pi k / (n - 1)``: functions odd about the poles (``f = sqrt G``,
``z'``) are sine series and even functions (``E``, ``z``, ``f'``) cosine
series, so differentiation and integration are exact for band-limited data.
"""
from __future__ import annotations

import io
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.fft import dct, dst, idct, idst

from massbounds.errors import EmbeddingObstructed, ExtrapolationUnreliable
from massbounds.metric import MetricField, interpolator

N_LATITUDE = 512

# --------------------------------------------------------------------------- ADM


@dataclass
class AdmResult:
    """ADM mass in Schwarzschild units.

    Attributes
    ----------
    mass : float
        Extrapolated to infinite radius (linear in 1/r).
    flux_values : list of (radius, raw flux)
    normalization : float
        ``c`` with ``mass(r) = c * flux(r) * scale``.
    masses : list of float
        Calibrated mass per radius.
    error : float
        Difference between the extrapolation and the outermost sample.
    """

    mass: float
    flux_values: list
    normalization: float
    masses: list
    error: float
    path: str
    flags: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _sphere(r, n_theta, n_phi):
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    st = np.sqrt(1 - x * x)
    nrm = np.stack([st[:, None] * np.cos(phi), st[:, None] * np.sin(phi),
                    x[:, None] * np.ones_like(phi)], axis=-1).reshape(-1, 3)
    w = np.repeat(wx, n_phi) * (2 * np.pi / n_phi) * r * r
    return r * nrm, nrm, w


def adm_flux(metric: MetricField, radius: float, path: str = "auto",
             n_theta: int = 24, n_phi: int = 48) -> float:
    """Raw flux through the coordinate sphere of ``radius``.

    Conformal path: ``int d_r u dS``.  General path:
    ``int (d_j g_ij - d_i g_jj) nu^i dS``.  Both use second-order gradients
    interpolated cubically to Gauss-Legendre x trapezoid points.
    """
    grid = metric.grid
    if path == "auto":
        path = "conformal" if metric.is_conformal else "general"
    pts, nrm, w = _sphere(radius, n_theta, n_phi)
    h = grid.h
    if path == "conformal":
        du = np.gradient(metric.u, h, edge_order=2)
        dr = sum(interpolator(grid, du[i])(pts) * nrm[:, i] for i in range(3))
        return float(np.sum(w * dr))
    g = metric.components
    dg = [[np.gradient(g[i, j], h, edge_order=2) for j in range(3)] for i in range(3)]
    vec = []
    for i in range(3):
        v = sum(dg[i][j][j] - dg[j][j][i] for j in range(3))
        vec.append(interpolator(grid, v)(pts))
    return float(np.sum(w * sum(vec[i] * nrm[:, i] for i in range(3))))


def adm_mass(metric: MetricField, radii, path: str = "auto", scale: float = 1.0,
             n_theta: int = 24, n_phi: int = 48) -> AdmResult:
    """ADM mass from fluxes on several coordinate spheres, extrapolated in ``1/r``.

    Normalization is fixed so ``u = 1 + m/(2r)`` gives ``m``: ``-1/(2 pi)``
    for the conformal flux and ``1/(16 pi)`` for the general one.  When the
    metric tends to ``b^4 delta`` instead of ``delta``, pass ``scale = b``;
    rescaling coordinates then multiplies the conformal mass by ``b`` and
    divides the general flux by ``b^2``.
    """
    radii = sorted(float(r) for r in radii)
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    if path == "auto":
        path = "conformal" if metric.is_conformal else "general"
    fluxes = [adm_flux(metric, r, path, n_theta, n_phi) for r in radii]
    if path == "conformal":
        c = -1.0 / (2 * np.pi)
        masses = [c * f * scale for f in fluxes]
    else:
        c = 1.0 / (16 * np.pi)
        masses = [c * f / scale ** 2 for f in fluxes]
    inv = 1.0 / np.array(radii)
    X = np.stack([np.ones_like(inv), inv], axis=1)
    (m_inf, _), *_ = np.linalg.lstsq(X, np.array(masses), rcond=None)
    flags = []
    d = np.diff(masses)
    scale_m = max(abs(m_inf), 1e-12)
    if len(d) > 1 and not (np.all(d >= -1e-12 * scale_m) or np.all(d <= 1e-12 * scale_m)):
        if np.max(np.abs(d)) > 1e-3 * scale_m:
            flags.append("extrapolation-unreliable")
            warnings.warn("flux sequence is not monotone", ExtrapolationUnreliable)
    return AdmResult(float(m_inf), [(r, f) for r, f in zip(radii, fluxes)], c,
                     [float(m) for m in masses], float(abs(m_inf - masses[-1])), path, flags)


# --------------------------------------------------------------------------- spectral latitude calculus


def latitude(n: int = N_LATITUDE) -> np.ndarray:
    return np.linspace(0.0, np.pi, n)


def _cos_coeffs(v):
    return dct(v, type=1) / (len(v) - 1)


def _cos_eval(a):
    return idct(a, type=1) * (len(a) - 1)


def _sin_coeffs(v):
    # interior nodes only; poles vanish for odd functions
    return dst(v[1:-1], type=1) / (len(v) - 1)


def _sin_eval(b, n):
    out = np.zeros(n)
    out[1:-1] = idst(b, type=1) * (n - 1)
    return out


def d_even(v):
    """Derivative of an even (cosine-series) function; result is odd."""
    a = _cos_coeffs(v)
    k = np.arange(len(a))
    b = -(k * a)[1:-1]
    return _sin_eval(b, len(v))


def d_odd(v):
    """Derivative of an odd (sine-series) function; result is even."""
    n = len(v)
    b = _sin_coeffs(v)
    k = np.arange(1, n - 1)
    a = np.zeros(n)
    a[1:-1] = k * b
    return _cos_eval(a)


def integrate_odd(v) -> float:
    """``int_0^pi v dtheta`` for an odd function sampled on the latitude grid."""
    b = _sin_coeffs(v)
    k = np.arange(1, len(v) - 1)
    return float(np.sum(b * (1 - (-1.0) ** k) / k))


def antiderivative_odd(v):
    """``int_0^theta v`` for odd ``v``; the result is even."""
    n = len(v)
    b = _sin_coeffs(v)
    k = np.arange(1, n - 1)
    a = np.zeros(n)
    a[1:-1] = -b / k
    # constant sum(b/k) makes the value at 0 vanish; the series halves a[0]
    a[0] = 2.0 * np.sum(b / k)
    return _cos_eval(a)


# --------------------------------------------------------------------------- surfaces


@dataclass
class InducedMetric2:
    """Axisymmetric metric ``E dtheta^2 + G dphi^2`` on the latitude grid."""

    theta: np.ndarray
    E: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.E = np.asarray(self.E, dtype=float)
        self.G = np.asarray(self.G, dtype=float)
        inner = slice(1, -1)
        if np.any(self.E <= 0):
            raise ValueError("E must be positive")
        if np.any(self.G[inner] <= 0):
            raise ValueError("G must be positive away from the poles")

    @classmethod
    def round(cls, rho: float, n: int = N_LATITUDE) -> "InducedMetric2":
        t = latitude(n)
        return cls(t, np.full(n, rho * rho), (rho * np.sin(t)) ** 2)

    @property
    def f(self) -> np.ndarray:
        f = np.sqrt(np.maximum(self.G, 0.0))
        f[0] = f[-1] = 0.0
        return f

    @property
    def gauss_curvature(self) -> np.ndarray:
        """``K = -(f'/sqrt E)' / (f sqrt E)``; pole values by l'Hopital."""
        f = self.f
        sE = np.sqrt(self.E)
        fp = d_odd(f)
        inner = fp / sE                      # even
        num = d_even(inner)                  # odd
        K = np.empty_like(f)
        K[1:-1] = -num[1:-1] / (f[1:-1] * sE[1:-1])
        # at the poles both numerator and f vanish: ratio of derivatives
        dnum = d_odd(num)
        K[0] = -dnum[0] / (fp[0] * sE[0])
        K[-1] = -dnum[-1] / (fp[-1] * sE[-1])
        return K

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("theta,E,G\n")
        for row in zip(self.theta, self.E, self.G):
            out.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return out.getvalue()


@dataclass
class SurfaceOfRevolution:
    """Profile ``(f(theta), z(theta))`` of an axisymmetric surface in R^3."""

    theta: np.ndarray
    f: np.ndarray
    z: np.ndarray

    @classmethod
    def spheroid(cls, a: float, c: float, n: int = N_LATITUDE) -> "SurfaceOfRevolution":
        t = latitude(n)
        f = a * np.sin(t)
        f[0] = f[-1] = 0.0
        return cls(t, f, -c * np.cos(t))

    @classmethod
    def sphere(cls, rho: float, n: int = N_LATITUDE):
        return cls.spheroid(rho, rho, n)

    def translated(self, dz: float) -> "SurfaceOfRevolution":
        return SurfaceOfRevolution(self.theta, self.f, self.z + dz)

    def reflected(self) -> "SurfaceOfRevolution":
        """Mirror image in the plane z = 0, re-parametrized from the new south pole."""
        return SurfaceOfRevolution(self.theta, self.f[::-1].copy(), -self.z[::-1])

    def derivatives(self):
        fp = d_odd(self.f)
        zc = self.z - 0.5 * (self.z[0] + self.z[-1])
        zp = d_even(zc)
        return fp, d_even(fp), zp, d_odd(zp)

    def induced(self) -> InducedMetric2:
        fp, _, zp, _ = self.derivatives()
        return InducedMetric2(self.theta, fp * fp + zp * zp, self.f ** 2)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("theta,f,z\n")
        for row in zip(self.theta, self.f, self.z):
            out.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return out.getvalue()


def weyl_embed_axisymmetric(metric: InducedMetric2, check_curvature: bool = True
                            ) -> SurfaceOfRevolution:
    """Isometric embedding of an axisymmetric positive-curvature sphere as a surface of revolution.

    ``f = sqrt G`` and ``z' = sqrt(E - f'^2)`` integrated spectrally from the
    south pole.

    Raises
    ------
    ValueError
        If the Gauss curvature is not positive.
    EmbeddingObstructed
        If ``E - f'^2 <= 0`` inside ``(0, pi)``.
    """
    t = metric.theta
    if check_curvature:
        K = metric.gauss_curvature
        if np.any(K <= 0):
            bad = t[K <= 0]
            raise ValueError(f"Gauss curvature is not positive on [{bad.min():.4f}, {bad.max():.4f}]")
    f = metric.f
    fp = d_odd(f)
    disc = metric.E - fp * fp
    inner = disc[1:-1]
    if np.any(inner <= 0):
        bad = t[1:-1][inner <= 0]
        raise EmbeddingObstructed(
            f"E - (f')^2 <= 0 on [{bad.min():.4f}, {bad.max():.4f}]", (float(bad.min()), float(bad.max())))
    zp = np.sqrt(np.maximum(disc, 0.0))
    zp[0] = zp[-1] = 0.0
    z = antiderivative_odd(zp)
    return SurfaceOfRevolution(t, f, z)


def reference_mean_curvature(surface: SurfaceOfRevolution) -> np.ndarray:
    """``H0 = kappa_1 + kappa_2`` with the outward normal (unit sphere: 2).

    ``kappa_1 = (f' z'' - z' f'') / E^(3/2)`` along meridians and
    ``kappa_2 = z' / (f sqrt E)`` along parallels; at the poles
    ``kappa_2 = kappa_1``.
    """
    fp, fpp, zp, zpp = surface.derivatives()
    E = fp * fp + zp * zp
    k1 = (fp * zpp - zp * fpp) / E ** 1.5
    k2 = np.empty_like(k1)
    k2[1:-1] = zp[1:-1] / (surface.f[1:-1] * np.sqrt(E[1:-1]))
    k2[0], k2[-1] = k1[0], k1[-1]
    return k1 + k2


@dataclass
class SurfaceFunctionals:
    integral_H0: float
    area: float
    volume: float
    convex: bool


def surface_functionals(surface: SurfaceOfRevolution) -> SurfaceFunctionals:
    """Area, enclosed volume and total mean curvature by sine-series quadrature.

    ``A = 2 pi int f sqrt E``, ``V = pi int f^2 z'``,
    ``int H0 = 2 pi int H0 f sqrt E``.  Warns when the profile is not convex.
    """
    fp, fpp, zp, zpp = surface.derivatives()
    sE = np.sqrt(fp * fp + zp * zp)
    H0 = reference_mean_curvature(surface)
    A = 2 * np.pi * integrate_odd(surface.f * sE)
    V = np.pi * integrate_odd(surface.f ** 2 * zp)
    IH = 2 * np.pi * integrate_odd(H0 * surface.f * sE)
    k1 = (fp * zpp - zp * fpp) / sE ** 3
    convex = bool(np.all(k1 > 0) and np.all(zp[1:-1] > 0))
    if not convex:
        warnings.warn("profile is not convex; Minkowski inequalities need convexity")
    return SurfaceFunctionals(IH, A, V, convex)


# --------------------------------------------------------------------------- Brown-York


@dataclass
class ByResult:
    """Brown-York mass ``int (H0 - H) dsigma`` (``m_by``) and ``m_by / 8 pi``."""

    m_by: float
    m_by_physical: float
    H0: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    area: float
    volume: float | None = None
    path: str = "radial"
    cross_check: float | None = None

    def to_json(self) -> str:
        d = {"m_by": self.m_by, "m_by_physical": self.m_by_physical, "area": self.area,
             "volume": self.volume, "path": self.path, "cross_check": self.cross_check}
        return json.dumps(d, sort_keys=True)


def _by_from_fields(H0, H, surface_metric: InducedMetric2):
    f = surface_metric.f
    sE = np.sqrt(surface_metric.E)
    return 2 * np.pi * integrate_odd((H0 - H) * f * sE), 2 * np.pi * integrate_odd(f * sE)


def brown_york(metric: MetricField, radius: float, path: str = "auto",
               n: int = N_LATITUDE) -> ByResult:
    """Brown-York mass of the region inside the coordinate sphere ``|x| = radius``.

    ``path="radial"`` (metric with a radial profile) uses the round-sphere
    closed form ``H0 = 2 / rho`` with ``rho = u^2 r`` and cross-checks it
    against the embedding path.  ``path="grid"`` samples the induced metric
    and mean curvature from grid data, checks axial symmetry, embeds the
    surface and integrates ``H0 - H``.
    """
    if path == "auto":
        path = "radial" if metric.profile is not None else "grid"
    if path == "radial":
        p = metric.profile
        rho = float(p.areal_radius(radius))
        H = float(p.mean_curvature(radius))
        area = 4 * np.pi * rho * rho
        m = area * (2.0 / rho - H)
        ind = InducedMetric2.round(rho, n)
        surf = weyl_embed_axisymmetric(ind)
        H0 = reference_mean_curvature(surf)
        m_emb, _ = _by_from_fields(H0, np.full(n, H), ind)
        return ByResult(m, m / (8 * np.pi), H0, np.full(n, H), area, path="radial",
                        cross_check=float(m_emb))
    ind, Hlat = induced_sphere_metric(metric, radius, n)
    surf = weyl_embed_axisymmetric(ind)
    H0 = reference_mean_curvature(surf)
    m, area = _by_from_fields(H0, Hlat, ind)
    return ByResult(float(m), float(m) / (8 * np.pi), H0, Hlat, float(area), path="grid")


def induced_sphere_metric(metric: MetricField, radius: float, n: int = N_LATITUDE,
                          n_phi: int = 16, sym_tol: float = 1e-3):
    """Induced metric and mean curvature of a coordinate sphere, averaged over longitude.

    Raises
    ------
    ValueError
        If the data vary in longitude by more than ``sym_tol`` (relative).
    """
    t = latitude(n)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st, ct = np.sin(t)[:, None], np.cos(t)[:, None]
    # theta measured from the south pole: z = -r cos(theta)
    P = radius * np.stack([st * np.cos(phi), st * np.sin(phi), -ct * np.ones_like(phi)], axis=-1)
    dth = radius * np.stack([ct * np.cos(phi), ct * np.sin(phi), st * np.ones_like(phi)], axis=-1)
    dph = radius * np.stack([-st * np.sin(phi), st * np.cos(phi), 0 * st * phi], axis=-1)
    g = metric.components
    grid = metric.grid
    pts = P.reshape(-1, 3)
    gi = np.empty((3, 3, len(pts)))
    for i in range(3):
        for j in range(i, 3):
            gi[i, j] = gi[j, i] = interpolator(grid, g[i, j])(pts)
    gi = gi.reshape(3, 3, n, n_phi)
    E = np.einsum("ij...,...i,...j->...", gi, dth, dth)
    G = np.einsum("ij...,...i,...j->...", gi, dph, dph)
    F = np.einsum("ij...,...i,...j->...", gi, dth, dph)
    Em, Gm = E.mean(axis=1), G.mean(axis=1)
    spread = np.max(np.abs(E - Em[:, None])) / np.max(Em)
    if spread > sym_tol or np.max(np.abs(F)) > sym_tol * np.max(Em):
        raise ValueError("sphere data are not axially symmetric")
    Hs = _latitude_average(metric, radius, t, n_phi)
    Gm[0] = Gm[-1] = 0.0
    return InducedMetric2(t, Em, Gm), Hs


def _latitude_average(metric, radius, t, n_phi):
    grid = metric.grid
    x = np.stack(grid.coords)
    r = grid.radius
    dr = x / np.where(r > 0, r, 1.0)
    dr[2][r == 0] = 1.0          # any unit vector at the origin keeps the spline finite
    ginv = metric.inverse
    sqrtg = metric.volume_factor
    nu = np.einsum("ij...,j...->i...", ginv, dr)
    nu = nu / np.sqrt(np.einsum("i...,i...->...", nu, dr))
    div = sum(np.gradient(sqrtg * nu[i], grid.h, axis=i, edge_order=2) for i in range(3))
    Hf = div / sqrtg
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st, ct = np.sin(t)[:, None], np.cos(t)[:, None]
    P = radius * np.stack([st * np.cos(phi), st * np.sin(phi), -ct * np.ones_like(phi)], axis=-1)
    return interpolator(grid, Hf)(P.reshape(-1, 3)).reshape(len(t), n_phi).mean(axis=1)
