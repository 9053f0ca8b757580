"""Elliptic solves for ``Delta_g u - q u = f``, eigenvalues, Sobolev quotients, radial oracles.

The three-dimensional solvers share one discretization (see
:mod:`massbounds._stencil`): the symmetric form ``-sqrt(g) (Delta_g - q)``
with second-order cut-edge treatment of spherical boundaries, solved by
preconditioned conjugate gradients.  Because the matrix is symmetric and
weighted by the metric volume, CG breakdown certifies that the operator is
not coercive.

The radial helpers integrate ``w'' + (2/r) w' = F(r, w)`` with an adaptive
eighth-order Runge-Kutta scheme and serve as independent oracles.
"""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq, minimize

from massbounds import _stencil
from massbounds.errors import ExtrapolationUnreliable, NonCoerciveOperator
from massbounds.mesh import Grid3, ScalarField
from massbounds.metric import DecayModel, MetricField, fit_decay

SOBOLEV_FLAT = 3.0 * (np.pi / 2.0) ** (4.0 / 3.0)
"""Sharp Euclidean Sobolev constant in 3D: inf of |grad f|_2^2 / |f|_6^2."""


def _as_array(grid, q):
    if q is None:
        return None
    if isinstance(q, ScalarField):
        return np.asarray(q.values)
    if callable(q):
        return np.asarray(q(np.stack(grid.coords, axis=-1)), dtype=float)
    return np.broadcast_to(np.asarray(q, dtype=float), grid.dims)


@dataclass
class EllipticProblem:
    """Dirichlet problem ``Delta_g u - q u = rhs`` on a masked grid.

    Parameters
    ----------
    grid : Grid3
    metric : MetricField, optional
        Flat if omitted.
    q : ScalarField, ndarray, float or callable, optional
        Potential; a callable receives points of shape (..., 3).
    boundary : float or callable
        Dirichlet data on box faces and spheres; a callable gets an (n, 3) array.
    rhs : same types as ``q``, optional
    """

    grid: Grid3
    metric: MetricField | None = None
    q: object = None
    boundary: object = 1.0
    rhs: object = None

    def __post_init__(self):
        if self.metric is not None and self.metric.grid is not self.grid \
                and self.metric.grid != self.grid:
            raise ValueError("metric lives on a different grid")
        qa = _as_array(self.grid, self.q)
        if qa is not None and not np.all(np.isfinite(qa[self.grid.inside])):
            raise ValueError("potential is not finite on the domain")

    def potential(self):
        return _as_array(self.grid, self.q)

    def source(self):
        return _as_array(self.grid, self.rhs)


@dataclass
class SolveReport:
    """Solution of an elliptic problem plus diagnostics.

    Attributes
    ----------
    u : ScalarField
        Solution on the full grid.  Nodes outside the domain carry the
        boundary data at their radial projection.
    residual_norm : float
        Relative residual ``|b - A u| / |b|`` of the discrete system.
    lu_l2 : float
        Discrete L2 norm of ``Delta_g u - q u - rhs`` over the unknowns.
    iterations : int
    energy : float
        ``int |grad u|_g^2 + q u^2 dV_g`` including boundary couplings.
    boundary_flux : float
        Discrete ``int_{boundary} u d_nu u`` (equals ``energy`` for rhs = 0).
    extrapolation : dict, optional
        Truncation radii and fitted asymptotics for exterior solves.
    flags : list of str
    """

    u: ScalarField
    residual_norm: float
    lu_l2: float
    iterations: int
    energy: float
    boundary_flux: float
    history: list = field(default_factory=list, repr=False)
    extrapolation: dict | None = None
    flags: list = field(default_factory=list)

    def history_csv(self) -> str:
        out = io.StringIO()
        out.write("iteration,residual\n")
        for k, r in enumerate(self.history):
            out.write(f"{k},{r:.17g}\n")
        return out.getvalue()


def _projected_boundary(grid, boundary, shape_mask):
    """Boundary data at the radial projections of the masked nodes."""
    x = np.stack([c[shape_mask] for c in grid.coords], axis=1)
    r = np.linalg.norm(x, axis=1)
    target = np.empty_like(r)
    if grid.outer_radius is not None:
        target[:] = grid.outer_radius
    if grid.excision_radius is not None:
        inner = r <= grid.excision_radius
        if grid.outer_radius is None:
            inner[:] = True
        target[inner] = grid.excision_radius
    safe = np.where(r > 0, r, 1.0)
    proj = x * (target / safe)[:, None]
    proj[r == 0] = np.array([0.0, 0.0, 1.0]) * target[r == 0, None]
    return _stencil._boundary_values(boundary, proj)


def solve_dirichlet(problem: EllipticProblem, rtol: float = 1e-10, precond: str = "jacobi",
                    x0=None) -> SolveReport:
    """Solve ``Delta_g u - q u = rhs`` with Dirichlet data.

    Raises
    ------
    NonCoerciveOperator
        If conjugate gradients break down (the operator is indefinite).
    SolverDiverged
        If the iteration budget is exhausted; carries the residual history.
    """
    grid = problem.grid
    q = problem.potential()
    asm = _stencil.assemble(grid, problem.metric, q, problem.boundary)
    b = asm.b_bc.copy()
    src = problem.source()
    if src is not None:
        b -= asm.mass * np.asarray(src)[asm.unknown]
    guess = None if x0 is None else np.asarray(x0)[asm.unknown]
    x, history = _stencil.pcg(asm.A, b, x0=guess, rtol=rtol, precond=precond)
    full = asm.scatter(x)
    out = ~grid.inside
    if np.any(out):
        full[out] = _projected_boundary(grid, problem.boundary, out)
    res = b - asm.A @ x
    bn = np.linalg.norm(b)
    lu = res / asm.mass
    energy = float(x @ (asm.A @ x) - 2 * asm.b_bc @ x + asm.const_bc)
    flux = _boundary_flux(asm, x)
    report = SolveReport(
        u=ScalarField(grid, full, None if problem.metric is None else problem.metric.volume_factor),
        residual_norm=float(np.linalg.norm(res) / bn) if bn > 0 else 0.0,
        lu_l2=float(np.sqrt(np.sum(asm.mass * lu * lu))),
        iterations=len(history) - 1,
        energy=energy,
        boundary_flux=flux,
        history=history,
    )
    _check_max_principle(problem, q, src, report)
    return report


def _boundary_flux(asm, x):
    """Discrete ``int u d_nu u`` summed over the boundary couplings ``c g (g - u_i)``."""
    return float(asm.const_bc - asm.b_bc @ x)


def _check_max_principle(problem, q, src, report):
    """Flag violations of ``0 < u <= 1 + 10 h^2`` when q >= 0 and the data is 1."""
    if src is not None or callable(problem.boundary) or float(problem.boundary) != 1.0:
        return
    if q is not None and np.any(q[problem.grid.inside] < 0):
        return
    vals = report.u.values[problem.grid.inside]
    h = problem.grid.h
    if not (vals.min() > 0 and vals.max() <= 1 + 10 * h * h):
        report.flags.append("max-principle-violated")


# --------------------------------------------------------------------------- exterior


def sphere_average(grid: Grid3, values: np.ndarray, radius: float, n_theta: int = 16,
                   n_phi: int = 32) -> float:
    """Mean of a grid function over the coordinate sphere of ``radius`` (cubic interpolation)."""
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    st = np.sqrt(1 - x * x)
    pts = radius * np.stack([st[:, None] * np.cos(phi), st[:, None] * np.sin(phi),
                             x[:, None] * np.ones_like(phi)], axis=-1).reshape(-1, 3)
    w = np.repeat(wx, n_phi) / (2 * n_phi)
    f = RegularGridInterpolator(tuple(grid.axis(a) for a in range(3)), values, method="cubic")
    return float(np.sum(w * f(pts)))


def _richardson(L1, X1, L2, X2):
    """Linear extrapolation in 1/L to L = infinity."""
    return (L2 * X2 - L1 * X1) / (L2 - L1)


def solve_exterior(q=None, truncations: Sequence[float] = (4.0, 8.0, 16.0),
                   cells: int = 48, excision_radius: float | None = None,
                   inner_boundary=1.0, probe: tuple[float, float] | None = None,
                   n_probe: int = 6, rtol: float = 1e-10, precond: str = "jacobi"):
    """Exterior problem ``Delta u - q u = 0``, ``u -> const`` at infinity, by truncation.

    Each truncation ``L`` solves on the box ``[-L, L]^3`` (minus the excision
    ball) with ``cells`` cells per side, ``u = 1`` on the box faces and
    ``inner_boundary`` on the excision sphere.  The solution is fitted to
    ``b + A/r`` on a probe shell common to all boxes, and ``b``, ``A`` and the
    model mass ``2 A b`` (the ADM mass of ``(b + A/r)^4 delta``) are
    extrapolated linearly in ``1/L`` from the first two truncations.  A third
    truncation, when given, is compared against the extrapolation as a control.

    Parameters
    ----------
    q : callable or None
        Potential as a function of points (..., 3); must be O(r^-3).
    truncations : sequence of float
        Box half-widths, increasing.  Two are required, three recommended.

    Returns
    -------
    SolveReport
        The report of the largest truncation, with ``extrapolation`` holding
        per-truncation fits and the extrapolated ``b``, ``A``, ``mass`` and a
        ``regime`` (``"b=1"`` or ``"b=0"``).  Flags include
        ``"extrapolation-unreliable"`` when the sequence is not monotone.
    """
    Ls = [float(L) for L in truncations]
    if len(Ls) < 2 or any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise ValueError("need at least two increasing truncation radii")
    r_ex = excision_radius or 0.0
    if probe is None:
        probe = (max(r_ex, 0.0) + 0.25 * (Ls[0] - r_ex), r_ex + 0.6 * (Ls[0] - r_ex))
    radii = np.linspace(probe[0], probe[1], n_probe)
    fits, reports = [], []
    for L in Ls:
        grid = Grid3.cube(L, cells, excision_radius=excision_radius)

        def boundary(points, L=L):
            r = np.linalg.norm(points, axis=1)
            inner = np.full(len(r), 1.0)
            if excision_radius is not None:
                near = r < 0.5 * (excision_radius + L)
                if callable(inner_boundary):
                    inner[near] = inner_boundary(points[near])
                else:
                    inner[near] = float(inner_boundary)
            return inner

        if q is not None:
            _check_decay(q, L)
        rep = solve_dirichlet(EllipticProblem(grid, q=q, boundary=boundary), rtol=rtol,
                              precond=precond)
        shell = np.array([sphere_average(grid, rep.u.values, r) for r in radii])
        model = fit_decay(shell, radii)
        fits.append({"L": L, "b": model.b, "A": model.A, "mass": 2 * model.A * model.b,
                     "C": model.C, "shell_mean": float(shell.mean())})
        reports.append(rep)
    ext = {k: _richardson(Ls[0], fits[0][k], Ls[1], fits[1][k]) for k in ("b", "A", "mass")}
    flags = []
    for k in ("b", "A", "mass"):
        seq = np.array([f[k] for f in fits])
        d = np.diff(seq)
        if len(d) > 1 and not (np.all(d >= 0) or np.all(d <= 0)):
            flags.append("extrapolation-unreliable")
            warnings.warn(f"non-monotone {k} across truncations", ExtrapolationUnreliable)
            break
    control = None
    if len(Ls) >= 3:
        control = {k: _richardson(Ls[1], fits[1][k], Ls[2], fits[2][k]) for k in ("b", "A", "mass")}
    bhat = fits[-1]["b"] / fits[-1]["shell_mean"]
    regime = "b=1" if ext["b"] > 0.5 and bhat > 0.5 else "b=0"
    final = reports[-1]
    final.extrapolation = {
        "truncations": Ls, "probe_radii": [float(r) for r in radii], "fits": fits,
        "b": float(ext["b"]), "A": float(ext["A"]), "mass": float(ext["mass"]),
        "control": control, "regime": regime,
        "decay": DecayModel(A=float(ext["A"]), b=float(ext["b"]), C=fits[-1]["C"]),
    }
    final.flags.extend(flags)
    return final


def _check_decay(q, L):
    """Assert ``r^3 q`` does not grow across outer shells (O(r^-3) decay)."""
    rs = np.array([0.5 * L, 0.75 * L, 0.95 * L])
    dirs = np.eye(3)
    vals = [np.max(np.abs(q(r * dirs))) * r ** 3 for r in rs]
    if vals[-1] > 2 * max(vals[0], 1e-300) and vals[-1] > 1e-12:
        warnings.warn("potential does not decay like r^-3 on outer shells",
                      ExtrapolationUnreliable)


# --------------------------------------------------------------------------- eigenvalues


@dataclass
class EigenResult:
    """First Dirichlet eigenpair of ``-(Delta_g - q)``.

    ``eigenfunction`` is normalized in ``L2(dV_g)`` with positive integral.
    """

    lam: float
    eigenfunction: ScalarField
    rayleigh_history: list = field(default_factory=list, repr=False)
    iterations: int = 0


def first_dirichlet_eigenvalue(grid: Grid3, metric: MetricField | None = None, q=None,
                               tol: float = 1e-11, maxiter: int = 200,
                               precond: str = "jacobi") -> EigenResult:
    """Smallest eigenvalue of ``A phi = lam W phi`` by shifted inverse iteration.

    ``A`` is the assembled ``-sqrt(g)(Delta_g - q)`` with zero boundary data
    and ``W`` the diagonal metric mass.  The shift starts below ``min q`` (so
    the shifted operator is positive definite) and moves to 80% of the way to
    the current Rayleigh quotient once that has settled.

    Raises
    ------
    RuntimeError
        On stagnation, with the Ritz history in the message.
    """
    qa = _as_array(grid, q)
    asm = _stencil.assemble(grid, metric, qa, boundary=0.0)
    A, W = asm.A, asm.mass
    qmin = 0.0 if qa is None else float(min(0.0, np.min(qa[asm.unknown])))
    sigma = qmin - 1.0
    x = np.ones(asm.n)
    x /= np.sqrt(x @ (W * x))
    hist = []
    lam = np.inf
    Wd = sp.diags(W)
    for it in range(maxiter):
        M = A - sigma * Wd
        try:
            y, _ = _stencil.pcg(M.tocsr(), W * x, rtol=min(1e-6, tol * 10), precond=precond)
        except NonCoerciveOperator:
            sigma = sigma - 0.5 * abs(lam - sigma if np.isfinite(lam) else 1.0)
            continue
        x = y / np.sqrt(y @ (W * y))
        new = float(x @ (A @ x))
        hist.append(new)
        if abs(new - lam) <= tol * abs(new):
            lam = new
            break
        if np.isfinite(lam) and abs(new - lam) < 1e-3 * abs(new):
            sigma = max(sigma, sigma + 0.8 * (new - sigma))
        lam = new
    else:
        raise RuntimeError(f"inverse iteration stagnated; Ritz history {hist[-5:]}")
    if np.sum(W * x) < 0:
        x = -x
    full = np.zeros(grid.dims)
    full[asm.unknown] = x
    vf = None if metric is None else metric.volume_factor
    return EigenResult(lam, ScalarField(grid, full, vf), hist, it + 1)


# --------------------------------------------------------------------------- Sobolev


@dataclass
class SobolevEstimate:
    """Bracket on the Sobolev constant of a domain.

    Attributes
    ----------
    lower : float or None
        ``(min u / max u)^2 * S_flat`` for conformal metrics (None otherwise).
    minimized : float
        Smallest quotient found; an upper bound on the constant.
    best : ScalarField
        Minimizing test function.
    flags : list of str
        ``"descent-stalled"`` when the optimizer stopped without converging.
    """

    lower: float | None
    minimized: float
    best: ScalarField
    flags: list = field(default_factory=list)


def sobolev_lower_bound(metric: MetricField | None, mask=None) -> float | None:
    """``(min u / max u)^2 * S_flat`` for ``g = u^4 delta``.

    The gradient term ``int u^2 |grad_0 f|^2`` gains at least ``min u^2`` and the
    ``L^6`` term ``(int u^6 f^6)^(1/3)`` at most ``max u^2``.
    """
    if metric is None:
        return SOBOLEV_FLAT
    if not metric.is_conformal:
        return None
    m = metric.grid.inside if mask is None else mask
    u = metric.u[m]
    return float((u.min() / u.max()) ** 2 * SOBOLEV_FLAT)


def _starts(grid, free, rng, n_random):
    x, y, z = grid.coords
    r = grid.radius
    span = min(grid.upper[a] - grid.origin[a] for a in range(3)) / 2
    centre = np.array([(grid.upper[a] + grid.origin[a]) / 2 for a in range(3)])
    if grid.outer_radius is not None:
        span = min(span, grid.outer_radius)
        centre = np.zeros(3)
    out = []
    for shift in (0.0, 0.3):
        c = centre + shift * span * np.array([1.0, 0.0, 0.0])
        d = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
        for scale in (0.05, 0.1, 0.2, 0.4):
            s = scale * span
            out.append((1 + (d / s) ** 2) ** -0.5)
    for _ in range(n_random):
        c = centre + rng.uniform(-0.5, 0.5, 3) * span
        s = rng.uniform(0.1, 0.5) * span
        d2 = ((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / s ** 2
        out.append(np.exp(-d2))
    return [np.where(free, f, 0.0)[free] for f in out]


def sobolev_estimate(grid: Grid3, metric: MetricField | None = None, n_random: int = 2,
                     seed: int = 0, maxiter: int = 400, layer: int = 2,
                     starts: Sequence[np.ndarray] | None = None) -> SobolevEstimate:
    """Minimize ``int |grad f|_g^2 / (int f^6 dV_g)^(1/3)`` over compactly supported f.

    Test functions are trilinear interpolants of node values that vanish on
    the ``layer``-cell boundary layer, and both integrals are exact for them
    (coefficients interpolated trilinearly).  Every quotient evaluated is
    therefore the quotient of an actual compactly supported function, so the
    minimum found is an upper bound on the Sobolev constant.  The quotient is
    minimized with L-BFGS from bubble profiles at several centres and scales
    plus random Gaussian bumps; the best local minimum is returned.

    ``starts`` adds extra initial fields (full-grid arrays, cut to the free
    nodes).  Passing the minimizer found on a smaller domain makes the
    estimate on a larger domain provably no larger.
    """
    free = grid.inside & ~grid.boundary_layer(layer)
    if not np.any(free):
        raise ValueError("no free nodes after removing the boundary layer")
    A, P, w = _stencil.q1_operators(grid, metric, free)

    def fun(f):
        Af = A @ f
        E = f @ Af
        fg = P @ f
        S = np.sum(w * fg ** 6)
        Q = E * S ** (-1.0 / 3.0)
        dS = 6.0 * (P.T @ (w * fg ** 5))
        g = 2 * Af * S ** (-1.0 / 3.0) - (E / 3.0) * S ** (-4.0 / 3.0) * dS
        return Q, g

    rng = np.random.default_rng(seed)
    best, best_f, flags = np.inf, None, []
    initial = _starts(grid, free, rng, n_random)
    for extra in starts or ():
        extra = np.asarray(getattr(extra, "values", extra), dtype=float)
        if np.any(extra[free] != 0):
            initial.append(extra[free])
    for f0 in initial:
        f0 = f0 / np.max(np.abs(f0))
        res = minimize(fun, f0, jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "gtol": 1e-10})
        if res.fun < best:
            best, best_f = float(res.fun), res.x
            ok = res.success
    if not ok:
        flags.append("descent-stalled")
    full = np.zeros(grid.dims)
    full[free] = best_f / np.max(np.abs(best_f))
    vf = None if metric is None else metric.volume_factor
    return SobolevEstimate(sobolev_lower_bound(metric), best, ScalarField(grid, full, vf), flags)


def aubin_talenti_quotient(scale: float, cutoff: float, radius: float, n: int = 4000) -> float:
    """Radial quotient of ``(1 + (r/s)^2)^(-1/2)`` times a smooth cutoff vanishing at ``radius``.

    The cutoff is ``1`` on ``r <= cutoff`` and decays to zero at ``radius``
    through ``cos^2``.  Integrals use adaptive quadrature.
    """
    def cut(r):
        if r <= cutoff:
            return 1.0, 0.0
        t = (r - cutoff) / (radius - cutoff)
        return np.cos(np.pi * t / 2) ** 2, -np.pi / (radius - cutoff) * np.cos(np.pi * t / 2) \
            * np.sin(np.pi * t / 2)

    def f(r):
        c, dc = cut(r)
        b = (1 + (r / scale) ** 2) ** -0.5
        db = -(r / scale ** 2) * (1 + (r / scale) ** 2) ** -1.5
        return b * c, db * c + b * dc

    pts = [cutoff] if 0 < cutoff < radius else None
    E = quad(lambda r: 4 * np.pi * r * r * f(r)[1] ** 2, 0, radius, points=pts, limit=400)[0]
    S = quad(lambda r: 4 * np.pi * r * r * f(r)[0] ** 6, 0, radius, points=pts, limit=400)[0]
    return E / S ** (1 / 3)


# --------------------------------------------------------------------------- radial oracles


@dataclass
class RadialSolution:
    """Dense radial solution ``w(r)`` with derivative; callable."""

    sol: object
    r_min: float
    r_max: float
    start: float
    series: tuple

    def __call__(self, r):
        return self.value(r)[0]

    def value(self, r):
        r = np.asarray(r, dtype=float)
        w = np.empty_like(r)
        dw = np.empty_like(r)
        near = r < self.start
        w0, c = self.series
        w[near] = w0 + c * r[near] ** 2 / 6
        dw[near] = c * r[near] / 3
        far = ~near
        if np.any(far):
            y = self.sol(r[far])
            w[far], dw[far] = y[0], y[1]
        return w, dw

    def derivative(self, r):
        return self.value(r)[1]


def radial_shoot(F: Callable, r_min: float, r_max: float, w0: float, dw0: float = 0.0,
                 rtol: float = 1e-10, atol: float = 1e-12, blowup: float = 1e12) -> RadialSolution:
    """Integrate ``w'' + (2/r) w' = F(r, w)`` from ``r_min`` to ``r_max``.

    At ``r_min = 0`` regularity ``w'(0) = 0`` is imposed and the first step
    uses the series ``w = w0 + F(0, w0) r^2 / 6``.

    Raises
    ------
    ArithmeticError
        If ``|w|`` exceeds ``blowup`` or the integrator fails; the message
        names the last good radius.
    """
    if r_min == 0:
        c = float(F(0.0, w0))
        start = min(1e-4, (r_max - r_min) * 1e-3)
        y0 = [w0 + c * start ** 2 / 6, c * start / 3]
    else:
        c, start = 0.0, r_min
        y0 = [w0, dw0]

    def rhs(r, y):
        return [y[1], F(r, y[0]) - 2.0 * y[1] / r]

    def blow(r, y):
        return blowup - abs(y[0])

    blow.terminal = True
    sol = solve_ivp(rhs, (start, r_max), y0, method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=blow)
    if sol.status != 0:
        raise ArithmeticError(f"radial integration failed after r = {sol.t[-1]:.6g}: "
                              f"{sol.message}")
    return RadialSolution(sol.sol, r_min, r_max, start if r_min == 0 else -np.inf, (w0, c))


def radial_dirichlet(q: Callable, radius: float, boundary: float = 1.0) -> RadialSolution:
    """Regular solution of ``u'' + (2/r) u' = q u`` on the ball with ``u(radius) = boundary``."""
    w = radial_shoot(lambda r, y: q(r) * y, 0.0, radius, 1.0)
    scale = boundary / float(w(np.array([radius]))[0])
    return _scaled(w, scale)


class _scaled:
    def __init__(self, base, s):
        self.base, self.s = base, s

    def __call__(self, r):
        return self.s * self.base(r)

    def derivative(self, r):
        return self.s * self.base.derivative(r)


def radial_ball_eigenvalue(radius: float = 1.0, q: Callable | None = None,
                           bracket: tuple[float, float] | None = None) -> float:
    """First Dirichlet eigenvalue of ``-(u'' + 2u'/r) + q u`` on a ball, by shooting."""
    qq = q or (lambda r: 0.0)

    def end(lam):
        w = radial_shoot(lambda r, y: (qq(r) - lam) * y, 0.0, radius, 1.0)
        return float(w(np.array([radius]))[0])

    if bracket is None:
        # the first eigenvalue lies between (pi/R)^2 + min q and (pi/R)^2 + max q
        qs = [qq(r) for r in np.linspace(0.0, radius, 401)]
        base = (np.pi / radius) ** 2
        bracket = (base + min(qs) - 0.5, base + max(qs) + 0.5)
    lo, hi = bracket
    return brentq(end, lo, hi, xtol=1e-14, rtol=1e-13)


def radial_potential(rho: Callable, support: float, r_max: float) -> tuple[RadialSolution, float]:
    """Solve ``(r^2 v')' = r^2 rho`` with ``v -> 0`` at infinity for ``rho`` supported in ``[0, support]``.

    Returns the solution on ``[0, r_max]`` and the tail coefficient
    ``A = int_0^support rho r^2 dr`` (so ``v = -A/r`` outside the support).
    """
    A = quad(lambda r: rho(r) * r * r, 0, support, epsabs=1e-14, epsrel=1e-13)[0]
    w = radial_shoot(lambda r, y: rho(r), 0.0, support, 0.0)
    v_s = float(w(np.array([support]))[0])
    shift = -A / support - v_s

    class _V:
        def __call__(self, r):
            r = np.asarray(r, dtype=float)
            inside = r <= support
            out = np.empty_like(r)
            out[inside] = w(r[inside]) + shift
            out[~inside] = -A / r[~inside]
            return out

        def derivative(self, r):
            r = np.asarray(r, dtype=float)
            inside = r <= support
            out = np.empty_like(r)
            out[inside] = w.derivative(r[inside])
            out[~inside] = A / r[~inside] ** 2
            return out

    return _V(), A
