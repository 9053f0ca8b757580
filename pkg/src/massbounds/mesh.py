"""Structured grids, scalar fields, finite-difference calculus and quadrature.

Domains are uniform Cartesian boxes, optionally intersected with a ball
(``outer_radius``) and/or with the exterior of a ball (``excision_radius``).
Both spheres are centred at the coordinate origin.  Each node owns the
node-centred cube of side ``h`` clipped to the box; quadrature weights are the
exact-in-z, Gauss-in-xy volume of that cube inside the domain.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

_MAGIC = b"MBF1"

# composite Gauss-Legendre rule used for cut-cell volume fractions
_PANELS = 4
_ORDER = 8


@dataclass(frozen=True)
class Grid3:
    """Uniform node-centred 3D grid.

    Parameters
    ----------
    origin : tuple of float
        Coordinates of node (0, 0, 0).
    h : float
        Grid spacing, identical on all axes.
    dims : tuple of int
        Number of nodes per axis.
    excision_radius : float, optional
        Nodes with radius below this are outside the domain.
    outer_radius : float, optional
        Nodes with radius above this are outside the domain.
    """

    origin: tuple[float, float, float]
    h: float
    dims: tuple[int, int, int]
    excision_radius: float | None = None
    outer_radius: float | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if min(self.dims) < 8:
            raise ValueError(f"every axis needs at least 8 nodes, got {self.dims}")
        if (self.excision_radius is not None and self.outer_radius is not None
                and self.excision_radius >= self.outer_radius):
            raise ValueError("excision radius must be below the outer radius")
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))

    @classmethod
    def cube(cls, half_width: float, n: int, **kw) -> "Grid3":
        """Box [-L, L]^3 with ``n`` cells per axis (n + 1 nodes)."""
        h = 2.0 * half_width / n
        return cls((-half_width,) * 3, h, (n + 1,) * 3, **kw)

    @classmethod
    def ball(cls, radius: float, n: int, pad: int = 2, **kw) -> "Grid3":
        """Grid covering the ball of ``radius`` with ``n`` cells per diameter."""
        h = 2.0 * radius / n
        m = n + 2 * pad
        lo = -radius - pad * h
        return cls((lo,) * 3, h, (m + 1,) * 3, outer_radius=radius, **kw)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def axis(self, a: int) -> np.ndarray:
        return self.origin[a] + self.h * np.arange(self.dims[a])

    @property
    def upper(self) -> tuple[float, float, float]:
        return tuple(self.origin[a] + self.h * (self.dims[a] - 1) for a in range(3))

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        x, y, z = self.coords
        return np.sqrt(x * x + y * y + z * z)

    @cached_property
    def on_box_face(self) -> np.ndarray:
        face = np.zeros(self.dims, dtype=bool)
        face[0], face[-1] = True, True
        face[:, 0], face[:, -1] = True, True
        face[:, :, 0], face[:, :, -1] = True, True
        return face

    def in_domain(self, points: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(points, axis=-1)
        ok = np.ones(r.shape, dtype=bool)
        if self.excision_radius is not None:
            ok &= r > self.excision_radius
        if self.outer_radius is not None:
            ok &= r < self.outer_radius
        return ok

    @cached_property
    def inside(self) -> np.ndarray:
        """Nodes in the open domain (box faces included, sphere exteriors not)."""
        r = self.radius
        ok = np.ones(self.dims, dtype=bool)
        if self.excision_radius is not None:
            ok &= r > self.excision_radius
        if self.outer_radius is not None:
            ok &= r < self.outer_radius
        return ok

    @cached_property
    def interior(self) -> np.ndarray:
        """Unknown nodes of a Dirichlet problem: inside and off the box faces."""
        return self.inside & ~self.on_box_face

    @cached_property
    def masked(self) -> np.ndarray:
        return ~self.inside

    @cached_property
    def weights(self) -> np.ndarray:
        """Euclidean volume of each node cell inside the domain."""
        return _cell_volumes(self)

    @property
    def domain_volume(self) -> float:
        return float(np.sum(self.weights))

    def boundary_layer(self, width: int = 2) -> np.ndarray:
        """Nodes within ``width`` cells of the domain boundary (or outside it)."""
        near = ~self.inside | self.on_box_face
        out = near.copy()
        for a in range(3):
            for s in range(1, width + 1):
                out |= _shift(near, a, s) | _shift(near, a, -s)
        # diagonal reach for curved boundaries
        r = self.radius
        if self.outer_radius is not None:
            out |= r > self.outer_radius - width * self.h * np.sqrt(3)
        if self.excision_radius is not None:
            out |= r < self.excision_radius + width * self.h * np.sqrt(3)
        return out


def _shift(mask: np.ndarray, axis: int, s: int) -> np.ndarray:
    out = np.zeros_like(mask)
    src = [slice(None)] * 3
    dst = [slice(None)] * 3
    if s > 0:
        src[axis], dst[axis] = slice(s, None), slice(None, -s)
    else:
        src[axis], dst[axis] = slice(None, s), slice(-s, None)
    out[tuple(dst)] = mask[tuple(src)]
    return out


def _cell_volumes(grid: Grid3) -> np.ndarray:
    h = grid.h
    # clipped cell extents per axis (half cells on the box faces)
    lo, hi = [], []
    for a in range(3):
        x = grid.axis(a)
        lo.append(np.maximum(x - h / 2, x[0]))
        hi.append(np.minimum(x + h / 2, x[-1]))
    widths = [hi[a] - lo[a] for a in range(3)]
    box = widths[0][:, None, None] * widths[1][None, :, None] * widths[2][None, None, :]
    vol = np.where(grid.inside, box, 0.0)
    radii = [R for R in (grid.excision_radius, grid.outer_radius) if R is not None]
    if not radii:
        return vol
    r = grid.radius
    reach = np.sqrt(3.0) * h / 2 * (1 + 1e-9)
    cut = np.zeros(grid.dims, dtype=bool)
    for R in radii:
        cut |= np.abs(r - R) <= reach
    idx = np.nonzero(cut)
    vol[idx] = _cut_volume(grid, [lo[a][idx[a]] for a in range(3)],
                           [hi[a][idx[a]] for a in range(3)])
    return vol


def _gauss_panels(a: np.ndarray, b: np.ndarray):
    t, w = np.polynomial.legendre.leggauss(_ORDER)
    edges = np.linspace(0.0, 1.0, _PANELS + 1)
    s = np.concatenate([(edges[k] + edges[k + 1]) / 2 + (t / 2) * (edges[k + 1] - edges[k])
                        for k in range(_PANELS)])
    ws = np.concatenate([w / 2 * (edges[k + 1] - edges[k]) for k in range(_PANELS)])
    L = (b - a)[:, None]
    return a[:, None] + L * s[None, :], L * ws[None, :]


def _cut_volume(grid: Grid3, lo, hi, chunk: int = 4096) -> np.ndarray:
    n = lo[0].size
    out = np.empty(n)
    rin = grid.excision_radius
    rout = grid.outer_radius
    for start in range(0, n, chunk):
        sl = slice(start, start + chunk)
        xs, wx = _gauss_panels(lo[0][sl], hi[0][sl])
        ys, wy = _gauss_panels(lo[1][sl], hi[1][sl])
        rho2 = xs[:, :, None] ** 2 + ys[:, None, :] ** 2
        z0 = lo[2][sl][:, None, None]
        z1 = hi[2][sl][:, None, None]

        def chord(R):
            s = np.sqrt(np.maximum(R * R - rho2, 0.0))
            return np.clip(np.minimum(z1, s) - np.maximum(z0, -s), 0.0, None)

        length = chord(rout) if rout is not None else (z1 - z0) * np.ones_like(rho2)
        if rin is not None:
            length = length - chord(rin)
        out[sl] = np.einsum("ci,cj,cij->c", wx, wy, length)
    return out


@dataclass(frozen=True)
class RadialGrid:
    """Radial node set on [r_min, r_max] for spherically symmetric oracles."""

    r_min: float
    r_max: float
    n: int = 512

    def __post_init__(self):
        if not 0 <= self.r_min < self.r_max:
            raise ValueError("need 0 <= r_min < r_max")
        if self.n < 64:
            raise ValueError("radial grids need at least 64 nodes")

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.n)

    @property
    def shape(self) -> tuple[int]:
        return (self.n,)

    @cached_property
    def weights(self) -> np.ndarray:
        r = self.nodes
        dr = np.diff(r)
        w = np.zeros_like(r)
        w[:-1] += dr / 2
        w[1:] += dr / 2
        return 4 * np.pi * r * r * w


@dataclass
class ScalarField:
    """Node values on a grid, with optional metric volume factor per node."""

    grid: Grid3 | RadialGrid
    values: np.ndarray
    volume_factor: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(self.grid.shape):
            raise ValueError(f"values shape {self.values.shape} != grid {self.grid.shape}")
        self.values.setflags(write=False)

    @property
    def support(self) -> np.ndarray:
        return self.grid.weights > 0

    @property
    def weights(self) -> np.ndarray:
        w = self.grid.weights
        return w if self.volume_factor is None else w * self.volume_factor

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values, self.volume_factor)

    def __neg__(self):
        return self.with_values(-self.values)

    def positive_part(self) -> "ScalarField":
        return self.with_values(np.maximum(self.values, 0.0))

    def negative_part(self) -> "ScalarField":
        return self.with_values(np.maximum(-self.values, 0.0))

    def sup(self) -> float:
        return float(np.max(self.values[self.support]))

    def inf(self) -> float:
        return float(np.min(self.values[self.support]))

    def to_bytes(self) -> bytes:
        return field_to_bytes(self)

    def to_csv(self) -> str:
        return field_to_csv(self)


def check_finite(field_: ScalarField) -> None:
    bad = field_.support & ~np.isfinite(field_.values)
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"non-finite value at node {node}")


def integrate(field_: ScalarField, metric=None) -> float:
    """Quadrature of a field over its domain.

    With ``metric`` given (a :class:`massbounds.metric.MetricField`) the
    metric volume element is used, otherwise the field's own volume factor
    (Euclidean if it has none).
    """
    check_finite(field_)
    w = field_.grid.weights
    if metric is not None:
        w = w * metric.volume_factor
    elif field_.volume_factor is not None:
        w = w * field_.volume_factor
    mask = w != 0
    return float(np.sum((field_.values[mask] * w[mask]).ravel()))


def gradient(field_: ScalarField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Second-order gradient: centred inside, one-sided on the box faces."""
    g = field_.grid
    if not isinstance(g, Grid3):
        raise TypeError("gradient needs a Grid3 field")
    if min(g.dims) < 3:
        raise ValueError("every axis needs at least 3 nodes")
    return tuple(np.gradient(field_.values, g.h, edge_order=2))


def second_derivative(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    f = np.moveaxis(values, axis, 0)
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / (h * h)
    d[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / (h * h)
    d[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / (h * h)
    return np.moveaxis(d, 0, axis)


def laplacian_flat(field_: ScalarField) -> ScalarField:
    g = field_.grid
    if min(g.dims) < 4:
        raise ValueError("every axis needs at least 4 nodes")
    lap = sum(second_derivative(field_.values, g.h, a) for a in range(3))
    return field_.with_values(lap)


def extend_by_zero_and_sobolev_quotient(test_field: ScalarField, metric=None,
                                        layer: int = 2) -> float:
    """Sobolev quotient  int |grad f|^2 / (int f^6)^(1/3)  of a compactly supported field.

    ``f`` must vanish on the ``layer``-cell boundary layer; it is then extended
    by zero, so the quotient is that of a compactly supported test function.
    """
    from massbounds import _stencil

    g = test_field.grid
    f = test_field.values
    layer_mask = g.boundary_layer(layer)
    if np.any(f[layer_mask] != 0):
        raise ValueError("test field must vanish on the boundary layer")
    if not np.any(f != 0):
        raise ValueError("test field is identically zero")
    energy, sixth = _stencil.sobolev_parts(g, f, metric)
    return energy / sixth ** (1.0 / 3.0)


def field_to_bytes(field_: ScalarField) -> bytes:
    g = field_.grid
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<3q", *g.dims))
    buf.write(struct.pack("<d", g.h))
    buf.write(struct.pack("<3d", *g.origin))
    buf.write(np.ascontiguousarray(field_.values, dtype="<f8").tobytes(order="C"))
    return buf.getvalue()


def field_from_bytes(data: bytes, **grid_kw) -> ScalarField:
    if data[:4] != _MAGIC:
        raise ValueError("not a massbounds field file")
    dims = struct.unpack_from("<3q", data, 4)
    (h,) = struct.unpack_from("<d", data, 28)
    origin = struct.unpack_from("<3d", data, 36)
    values = np.frombuffer(data, dtype="<f8", offset=60).reshape(dims)
    return ScalarField(Grid3(origin, h, dims, **grid_kw), values.copy())


def field_to_csv(field_: ScalarField) -> str:
    g = field_.grid
    out = io.StringIO()
    if isinstance(g, RadialGrid):
        out.write("r,value\n")
        for r, v in zip(g.nodes, field_.values):
            out.write(f"{r:.17g},{v:.17g}\n")
        return out.getvalue()
    out.write("x,y,z,value\n")
    x, y, z = g.coords
    mask = g.inside
    for row in zip(x[mask], y[mask], z[mask], field_.values[mask]):
        out.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return out.getvalue()
