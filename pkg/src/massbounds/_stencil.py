"""Symmetric finite-difference assembly of ``-sqrt(g) (Delta_g - q)`` and a PCG solver.

The discrete operator is the Euler-Lagrange matrix of the quadratic form

    E(f) = sum_edges h K_e (f_i - f_j)^2
         + sum_cut  h K_i (f_i - f_G)^2 / theta
         + sum_nodes h^3 sqrt(g) q f^2
         + cross terms of the off-diagonal coefficient tensor,

where ``K = sqrt(g) g^{ij}``.  An edge leaving the domain through a sphere at
fraction ``theta`` of its length couples the node to the Dirichlet value
``f_G`` at the crossing point (symmetric ghost-fluid treatment), which keeps
the scheme second order on curved boundaries while the matrix stays SPD.

Unknowns are the ``grid.interior`` nodes.  Box-face nodes inside the domain
carry Dirichlet data at the node itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from massbounds.errors import NonCoerciveOperator, SolverDiverged

THETA_MIN = 1e-3


def coefficients(grid, metric):
    """Return (isotropic K or None, tensor K or None, sqrt g) on the full grid."""
    if metric is None:
        ones = np.ones(grid.dims)
        return ones, None, ones
    if metric.u is not None:
        u = metric.u
        return u * u, None, u ** 6
    return None, metric.density_inverse, metric.volume_factor


def _boundary_values(boundary, points):
    if callable(boundary):
        return np.asarray(boundary(points), dtype=float).reshape(len(points))
    return np.full(len(points), float(boundary))


def _crossing(grid, p, s, axis, outside_r):
    """Fraction theta along p -> p + s h e_axis where the domain boundary is met."""
    h = grid.h
    pa = p[:, axis] * s
    pp = np.einsum("ij,ij->i", p, p)
    theta = np.ones(len(p))
    R_out, R_in = grid.outer_radius, grid.excision_radius
    use_out = np.zeros(len(p), dtype=bool)
    if R_out is not None:
        use_out = outside_r >= R_out
        disc = np.maximum(pa[use_out] ** 2 - pp[use_out] + R_out ** 2, 0.0)
        theta[use_out] = (-pa[use_out] + np.sqrt(disc)) / h
    if R_in is not None:
        use_in = ~use_out
        disc = np.maximum(pa[use_in] ** 2 - pp[use_in] + R_in ** 2, 0.0)
        theta[use_in] = (-pa[use_in] - np.sqrt(disc)) / h
    return np.clip(theta, THETA_MIN, 1.0)


@dataclass
class Assembly:
    """Discrete Dirichlet operator on the interior unknowns of a grid.

    ``A x = b_bc + b_src`` is the discrete problem; ``form(x)`` evaluates the
    quadratic energy including boundary couplings.
    """

    grid: object
    A: sp.csr_matrix
    unknown: np.ndarray          # bool mask over the grid
    index: np.ndarray            # flat node -> unknown number (or -1)
    mass: np.ndarray             # h^3 sqrt(g) per unknown
    b_bc: np.ndarray
    const_bc: float
    known: np.ndarray            # full-grid array of Dirichlet values (nan where undefined)
    cut_nodes: np.ndarray = field(repr=False)
    cut_coeff: np.ndarray = field(repr=False)
    cut_value: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def form(self, x: np.ndarray) -> float:
        """Quadratic energy E evaluated at unknown values ``x``."""
        return float(x @ (self.A @ x) - 2.0 * self.b_bc @ x + self.const_bc)

    def scatter(self, x: np.ndarray) -> np.ndarray:
        """Full-grid array: unknowns from ``x``, Dirichlet data elsewhere."""
        full = self.known.copy()
        full[self.unknown] = x
        return full


def assemble(grid, metric=None, q=None, boundary=1.0) -> Assembly:
    """Assemble the symmetric operator for ``Delta_g - q`` with Dirichlet data.

    Parameters
    ----------
    grid : Grid3
    metric : MetricField, optional
        Flat when omitted.
    q : ndarray, optional
        Potential on the full grid.
    boundary : float or callable
        Dirichlet data; a callable receives an ``(n, 3)`` array of points.
    """
    iso, tensor, sqrtg = coefficients(grid, metric)
    h = grid.h
    dims = grid.dims
    inside = grid.inside
    unknown = grid.interior
    known_mask = inside & ~unknown
    flat_unknown = unknown.ravel()
    index = np.full(grid.size, -1, dtype=np.int64)
    index[flat_unknown] = np.arange(int(flat_unknown.sum()))
    n = int(flat_unknown.sum())
    pts = np.stack([c.ravel() for c in grid.coords], axis=1)

    known = np.full(grid.size, np.nan)
    kidx = np.nonzero(known_mask.ravel())[0]
    known[kidx] = _boundary_values(boundary, pts[kidx])

    rows, cols, vals = [], [], []
    b = np.zeros(n)
    const = 0.0
    cut_nodes, cut_coeff, cut_value = [], [], []
    flat_inside = inside.ravel()
    radius = grid.radius.ravel()
    strides = np.array([dims[1] * dims[2], dims[2], 1])

    def diag_of(a):
        if iso is not None:
            return iso.ravel()
        return tensor[a, a].ravel()

    for a in range(3):
        K = diag_of(a)
        for s in (1, -1):
            # nodes i (unknown) with neighbour j = i + s e_a
            sl = [slice(None)] * 3
            sl[a] = slice(0, dims[a] - 1) if s > 0 else slice(1, dims[a])
            src = np.zeros(dims, dtype=bool)
            src[tuple(sl)] = True
            i = np.nonzero(src.ravel() & flat_unknown)[0]
            j = i + s * strides[a]
            jin = flat_inside[j]
            # unknown-unknown edges are counted once, from the s > 0 side
            ii, jj = i[jin], j[jin]
            c = h * 0.5 * (K[ii] + K[jj])
            ju = index[jj] >= 0
            if s > 0:
                both = ju
                ri, rj, cb = index[ii[both]], index[jj[both]], c[both]
                rows += [ri, rj, ri, rj]
                cols += [ri, rj, rj, ri]
                vals += [cb, cb, -cb, -cb]
            # unknown - known (box face) edges, both directions
            kn = ~ju
            ri, ck = index[ii[kn]], c[kn]
            v = known[jj[kn]]
            rows.append(ri); cols.append(ri); vals.append(ck)
            np.add.at(b, ri, ck * v)
            const += float(np.sum(ck * v * v))
            # cut edges leaving through a sphere
            io, jo = i[~jin], j[~jin]
            if io.size:
                theta = _crossing(grid, pts[io], s, a, radius[jo])
                cross = pts[io].copy()
                cross[:, a] += s * theta * h
                g_val = _boundary_values(boundary, cross)
                cc = h * K[io] / theta
                ri = index[io]
                rows.append(ri); cols.append(ri); vals.append(cc)
                np.add.at(b, ri, cc * g_val)
                const += float(np.sum(cc * g_val * g_val))
                cut_nodes.append(io); cut_coeff.append(cc); cut_value.append(g_val)

    if tensor is not None:
        const += _cross_terms(grid, tensor, boundary, index, flat_unknown, known,
                              flat_inside, pts, strides, rows, cols, vals, b)

    mass = h ** 3 * sqrtg.ravel()[flat_unknown]
    if q is not None:
        qv = np.asarray(q, dtype=float).ravel()[flat_unknown]
        d = np.arange(n)
        rows.append(d); cols.append(d); vals.append(mass * qv)

    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    return Assembly(grid, A, unknown, index, mass, b, const, known.reshape(dims),
                    np.concatenate(cut_nodes) if cut_nodes else np.zeros(0, int),
                    np.concatenate(cut_coeff) if cut_coeff else np.zeros(0),
                    np.concatenate(cut_value) if cut_value else np.zeros(0))


def _cross_terms(grid, tensor, boundary, index, flat_unknown, known, flat_inside,
                 pts, strides, rows, cols, vals, b):
    """Off-diagonal tensor terms h/4 K_ab (f_{+a} - f_{-a})(f_{+b} - f_{-b})."""
    h = grid.h
    dims = grid.dims
    const = 0.0
    ui = np.nonzero(flat_unknown)[0]
    # unknown nodes are off the box faces, so all axis neighbours exist
    for a in range(3):
        for bb in range(3):
            if a == bb:
                continue
            c = h / 4.0 * tensor[a, bb].ravel()[ui]
            for sa in (1, -1):
                for sb in (1, -1):
                    p = ui + sa * strides[a]
                    qn = ui + sb * strides[bb]
                    coeff = c * sa * sb
                    vp = _neighbour_value(grid, boundary, ui, p, sa, a, known,
                                          flat_inside, pts)
                    vq = _neighbour_value(grid, boundary, ui, qn, sb, bb, known,
                                          flat_inside, pts)
                    pu, qu = index[p] >= 0, index[qn] >= 0
                    m = pu & qu
                    half = coeff[m] / 2
                    rows += [index[p[m]], index[qn[m]]]
                    cols += [index[qn[m]], index[p[m]]]
                    vals += [half, half]
                    m = pu & ~qu
                    np.add.at(b, index[p[m]], -coeff[m] * vq[m] / 2)
                    m = ~pu & qu
                    np.add.at(b, index[qn[m]], -coeff[m] * vp[m] / 2)
                    m = ~pu & ~qu
                    const += float(np.sum(coeff[m] * vp[m] * vq[m]))
    return const


def _neighbour_value(grid, boundary, i, j, s, axis, known, flat_inside, pts):
    """Dirichlet value used for neighbour ``j`` of ``i`` when ``j`` is not an unknown."""
    v = known[j].copy()
    out = ~flat_inside[j]
    if np.any(out):
        theta = _crossing(grid, pts[i[out]], s, axis, grid.radius.ravel()[j[out]])
        cross = pts[i[out]].copy()
        cross[:, axis] += s * theta * grid.h
        v[out] = _boundary_values(boundary, cross)
    return np.nan_to_num(v)


def jacobi(A):
    d = A.diagonal()
    if np.any(d <= 0):
        raise NonCoerciveOperator("operator has a non-positive diagonal entry")
    inv = 1.0 / d
    return lambda r: inv * r


def amg(A):
    try:
        import pyamg
    except ImportError as exc:      # optional dependency
        raise ImportError("precond='amg' needs pyamg: pip install 'artifact[amg]'") from exc

    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric")
    M = ml.aspreconditioner(cycle="V")
    return lambda r: M @ r


def pcg(A, b, x0=None, rtol=1e-10, maxiter=None, precond="jacobi"):
    """Preconditioned conjugate gradients with breakdown detection.

    Returns
    -------
    x : ndarray
    history : list of float
        Relative residual ``|b - A x| / |b|`` after each iteration.

    Raises
    ------
    NonCoerciveOperator
        When a search direction has ``p^T A p <= 0``.
    SolverDiverged
        When ``maxiter`` is exhausted.
    """
    M = jacobi(A) if precond == "jacobi" else amg(A) if precond == "amg" else precond
    n = A.shape[0]
    maxiter = maxiter or max(200, 20 * int(round(n ** (1 / 3))) ** 2)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), [0.0]
    history = [float(np.linalg.norm(r) / bnorm)]
    if history[-1] <= rtol:
        return x, history
    z = M(r)
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        Ap = A @ p
        curv = p @ Ap
        if not curv > 0:
            raise NonCoerciveOperator(
                f"conjugate gradients broke down (p.Ap = {curv:.3e}) after "
                f"{len(history) - 1} iterations")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        history.append(float(np.linalg.norm(r) / bnorm))
        if history[-1] <= rtol:
            return x, history
        z = M(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverDiverged(f"no convergence in {maxiter} iterations "
                         f"(residual {history[-1]:.3e})", history)


# --------------------------------------------------------------------------- trilinear elements
#
# The finite-difference form above is not the energy of any function, and at
# grid scale it can undercut the continuum Sobolev constant.  For quotients
# that must be genuine upper bounds we use the trilinear interpolant instead:
# its energy (coefficients interpolated trilinearly) is integrated exactly by
# the 2-point Gauss rule and its sixth power by the 4-point rule.

_CORNERS = np.array([[a, b, c] for a in (0, 1) for b in (0, 1) for c in (0, 1)])


def _shape(xi):
    """Trilinear shape values (m, 8) and gradients (m, 8, 3) at reference points xi (m, 3)."""
    lin = np.where(_CORNERS[None], xi[:, None, :], 1.0 - xi[:, None, :])     # (m, 8, 3)
    dlin = np.where(_CORNERS[None], 1.0, -1.0) * np.ones_like(lin)
    N = lin.prod(axis=2)
    dN = np.empty(lin.shape)
    for a in range(3):
        others = [b for b in range(3) if b != a]
        dN[..., a] = dlin[..., a] * lin[..., others[0]] * lin[..., others[1]]
    return N, dN


def _gauss_cube(order):
    t, w = np.polynomial.legendre.leggauss(order)
    t, w = (t + 1) / 2, w / 2
    pts = np.array([[a, b, c] for a in t for b in t for c in t])
    wts = np.array([a * b * c for a in w for b in w for c in w])
    return pts, wts


def q1_operators(grid, metric, free):
    """Exact trilinear-element energy matrix and sixth-power quadrature on ``free`` nodes.

    Returns
    -------
    A : csr_matrix
        ``f^T A f = int K^{ab} d_a f d_b f`` for the interpolant of ``f`` (free nodes).
    P : csr_matrix
        Interpolation from free nodes to 4-point Gauss points of touched cells.
    w : ndarray
        Gauss weight times interpolated volume factor at those points.
    """
    iso, tensor, sqrtg = coefficients(grid, metric)
    dims = np.array(grid.dims)
    h = grid.h
    flat_free = free.ravel()
    index = np.full(grid.size, -1, dtype=np.int64)
    index[flat_free] = np.arange(int(flat_free.sum()))
    strides = np.array([dims[1] * dims[2], dims[2], 1])
    # cells (by lower corner) touching a free node
    touch = np.zeros(tuple(dims - 1), dtype=bool)
    for c in _CORNERS:
        touch |= free[c[0]:dims[0] - 1 + c[0], c[1]:dims[1] - 1 + c[1], c[2]:dims[2] - 1 + c[2]]
    lower = np.argwhere(touch)
    base = lower @ strides
    nodes = base[:, None] + (_CORNERS @ strides)[None, :]          # (cells, 8)
    col = index[nodes]
    # energy with 2-point Gauss
    gp, gw = _gauss_cube(2)
    N, dN = _shape(gp)
    if tensor is None:
        Kc = iso.ravel()[nodes] @ N.T                                  # (cells, g)
        Ke = np.einsum("cg,g,gai,gbi->cab", Kc, gw, dN, dN) * h
    else:
        Kt = tensor.reshape(3, 3, -1)[:, :, nodes] @ N.T               # (3, 3, cells, g)
        Ke = np.einsum("ijcg,g,gai,gbj->cab", Kt, gw, dN, dN) * h
    keep = (col[:, :, None] >= 0) & (col[:, None, :] >= 0)
    rows = np.broadcast_to(col[:, :, None], Ke.shape)[keep]
    cols = np.broadcast_to(col[:, None, :], Ke.shape)[keep]
    n = int(flat_free.sum())
    A = sp.coo_matrix((Ke[keep], (rows, cols)), shape=(n, n)).tocsr()
    # sixth power with 4-point Gauss
    qp, qw = _gauss_cube(4)
    Nq, _ = _shape(qp)
    m = len(qp)
    vals = np.broadcast_to(Nq[None], (len(nodes), m, 8))
    cidx = np.broadcast_to(col[:, None, :], (len(nodes), m, 8))
    ridx = np.broadcast_to(np.arange(len(nodes) * m).reshape(-1, m)[:, :, None], cidx.shape)
    ok = cidx >= 0
    P = sp.coo_matrix((vals[ok], (ridx[ok], cidx[ok])), shape=(len(nodes) * m, n)).tocsr()
    vol = (sqrtg.ravel()[nodes] @ Nq.T) * qw[None, :] * h ** 3
    # only the part of each cell inside the domain counts; free nodes are far from
    # the boundary, so touched cells lie inside
    return A, P, vol.ravel()


def sobolev_parts(grid, f, metric=None):
    """Return (energy, int f^6 dV_g) of the trilinear interpolant of ``f``.

    ``f`` must vanish outside the domain interior; the interpolant is then a
    compactly supported H^1 function.
    """
    f = np.asarray(f, dtype=float)
    free = f != 0
    A, P, w = q1_operators(grid, metric, free)
    x = f[free]
    return float(x @ (A @ x)), float(np.sum(w * (P @ x) ** 6))
