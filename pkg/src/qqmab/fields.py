"""Uniform-grid fields and second-order finite-difference calculus.

Nodal values live in numpy arrays indexed ``[i, j(, k)]`` (``indexing="ij"``).
Vector fields carry their components on a leading axis.  Quaternion-valued
fields are :class:`~qqmab.quaternion.Quaternion` objects whose ``z``/``zeta``
arrays have the same layout.

Masked nodes (``mask == True``) are excluded: they are never read by a
stencil and come back as NaN.  Next to the mask or the domain edge the
stencils switch to one-sided second-order differences.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .quaternion import Quaternion, quat_exp, quat_mul


class GridError(ValueError):
    pass


class PathDomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridSpec:
    n: tuple[int, ...]
    h: tuple[float, ...]
    origin: tuple[float, ...] = None
    mask: np.ndarray | None = None
    periodic: bool = False

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        h = tuple(float(v) for v in self.h)
        if len(n) != len(h) or not 1 <= len(n) <= 3:
            raise GridError("n and h must have matching length 1..3")
        if any(v < 3 for v in n):
            raise GridError(f"every axis needs at least 3 nodes, got {n}")
        if any(not v > 0 for v in h):
            raise GridError(f"spacings must be strictly positive, got {h}")
        origin = (0.0,) * len(n) if self.origin is None else tuple(float(v) for v in self.origin)
        if len(origin) != len(n):
            raise GridError("origin has the wrong dimension")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "origin", origin)
        if self.mask is not None:
            mask = np.asarray(self.mask, bool)
            if mask.shape != n:
                raise GridError(f"mask shape {mask.shape} does not match grid {n}")
            object.__setattr__(self, "mask", mask)

    @classmethod
    def square(cls, n: int, length: float, origin=(0.0, 0.0), cell_centred=True, **kw):
        """n x n grid covering [origin, origin + length]^2.

        With ``cell_centred`` the nodes sit at cell midpoints, so halving the
        spacing exactly doubles ``n``.
        """
        h = length / n if cell_centred else length / (n - 1)
        off = 0.5 * h if cell_centred else 0.0
        return cls((n, n), (h, h), (origin[0] + off, origin[1] + off), **kw)

    # per-axis accessors
    nx = property(lambda self: self.n[0])
    ny = property(lambda self: self.n[1] if self.dim > 1 else 1)
    dx = property(lambda self: self.h[0])
    dy = property(lambda self: self.h[1] if self.dim > 1 else None)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def valid(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.n, bool)
        return ~self.mask

    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(n) for o, h, n in zip(self.origin, self.h, self.n)]

    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates as an (N, dim) array in C order."""
        return np.stack([c.ravel() for c in self.coords()], axis=-1)

    def upper(self) -> tuple[float, ...]:
        return tuple(o + h * (n - 1) for o, h, n in zip(self.origin, self.h, self.n))

    def with_mask(self, mask) -> "GridSpec":
        return GridSpec(self.n, self.h, self.origin, mask, self.periodic)

    def masked_where(self, predicate: Callable[..., np.ndarray]) -> "GridSpec":
        """Return a copy masking the nodes where ``predicate(*coords)`` holds."""
        return self.with_mask(np.asarray(predicate(*self.coords()), bool))

    def metadata(self) -> dict:
        meta = {"nx": self.nx, "ny": self.ny, "dx": self.dx, "dy": self.dy}
        if self.dim == 3:
            meta.update(nz=self.n[2], dz=self.h[2])
        return meta


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray | Quaternion

    def __post_init__(self):
        shape = self.values.shape if isinstance(self.values, Quaternion) else np.shape(self.values)
        if tuple(shape) != self.grid.shape:
            raise GridError(f"value shape {shape} does not match grid {self.grid.shape}")


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    values: np.ndarray | Quaternion  # leading axis = component

    def __post_init__(self):
        shape = self.values.shape if isinstance(self.values, Quaternion) else np.shape(self.values)
        if tuple(shape) != (self.grid.dim,) + self.grid.shape:
            raise GridError(
                f"vector field shape {shape} must be {(self.grid.dim,) + self.grid.shape}")


# ---------------------------------------------------------------------------
# stencils on plain arrays


def _shift(a: np.ndarray, k: int, axis: int, fill, periodic: bool) -> np.ndarray:
    """out[i] = a[i + k] along ``axis`` (filled beyond the edge unless periodic)."""
    if periodic:
        return np.roll(a, -k, axis=axis)
    out = np.full_like(a, fill)
    n = a.shape[axis]
    if abs(k) >= n:
        return out
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k >= 0:
        src[axis], dst[axis] = slice(k, n), slice(0, n - k)
    else:
        src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _lift(fn):
    """Let an array stencil also act on Quaternion values componentwise."""
    def wrapper(values, grid, *args, **kw):
        if isinstance(values, Quaternion):
            return Quaternion(fn(np.asarray(values.z, complex), grid, *args, **kw),
                              fn(np.asarray(values.zeta, complex), grid, *args, **kw))
        return fn(np.asarray(values), grid, *args, **kw)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _check_axis(grid: GridSpec, axis: int, need: int):
    if not grid.periodic and grid.n[axis] < need:
        raise GridError(f"axis {axis} has {grid.n[axis]} nodes, stencil needs {need}")


@_lift
def diff(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """First derivative along ``axis`` (works on leading-batched arrays too)."""
    _check_axis(grid, axis, 3)
    lead = values.ndim - grid.dim
    ax = lead + axis
    h = grid.h[axis]
    per = grid.periodic
    valid = np.broadcast_to(grid.valid, values.shape)
    f = np.where(valid, values, 0)
    v = [_shift(valid, k, ax, False, per) for k in (-2, -1, 1, 2)]
    vm2, vm1, vp1, vp2 = v
    fm2, fm1, fp1, fp2 = (_shift(f, k, ax, 0, per) for k in (-2, -1, 1, 2))
    central = valid & vm1 & vp1
    forward = valid & ~central & vp1 & vp2
    backward = valid & ~central & ~forward & vm1 & vm2
    out = np.full(values.shape, np.nan, dtype=np.result_type(values.dtype, float))
    out = np.where(central, (fp1 - fm1) / (2 * h), out)
    out = np.where(forward, (-3 * f + 4 * fp1 - fp2) / (2 * h), out)
    out = np.where(backward, (3 * f - 4 * fm1 + fm2) / (2 * h), out)
    return out


@_lift
def diff2(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """Second derivative along ``axis``; 4-point one-sided at edges."""
    _check_axis(grid, axis, 4)
    lead = values.ndim - grid.dim
    ax = lead + axis
    h2 = grid.h[axis] ** 2
    per = grid.periodic
    valid = np.broadcast_to(grid.valid, values.shape)
    f = np.where(valid, values, 0)
    vs = {k: _shift(valid, k, ax, False, per) for k in (-3, -2, -1, 1, 2, 3)}
    fs = {k: _shift(f, k, ax, 0, per) for k in (-3, -2, -1, 1, 2, 3)}
    central = valid & vs[-1] & vs[1]
    forward = valid & ~central & vs[1] & vs[2] & vs[3]
    backward = valid & ~central & ~forward & vs[-1] & vs[-2] & vs[-3]
    out = np.full(values.shape, np.nan, dtype=np.result_type(values.dtype, float))
    out = np.where(central, (fs[1] - 2 * f + fs[-1]) / h2, out)
    out = np.where(forward, (2 * f - 5 * fs[1] + 4 * fs[2] - fs[3]) / h2, out)
    out = np.where(backward, (2 * f - 5 * fs[-1] + 4 * fs[-2] - fs[-3]) / h2, out)
    return out


def _values(f):
    return f.values if isinstance(f, (ScalarField, VectorField)) else f


def _stack(parts):
    if isinstance(parts[0], Quaternion):
        return Quaternion(np.stack([p.z for p in parts]), np.stack([p.zeta for p in parts]))
    return np.stack(parts)


def fd_gradient(f: ScalarField) -> VectorField:
    g = f.grid
    return VectorField(g, _stack([diff(f.values, g, a) for a in range(g.dim)]))


def fd_divergence(v: VectorField) -> ScalarField:
    g = v.grid
    out = None
    for a in range(g.dim):
        term = diff(v.values[a], g, a)
        out = term if out is None else out + term
    return ScalarField(g, out)


def fd_curl(v: VectorField) -> ScalarField | VectorField:
    """z-component in 2D, full vector in 3D."""
    g = v.grid
    c = v.values
    if g.dim == 2:
        return ScalarField(g, diff(c[1], g, 0) - diff(c[0], g, 1))
    if g.dim == 3:
        return VectorField(g, _stack([
            diff(c[2], g, 1) - diff(c[1], g, 2),
            diff(c[0], g, 2) - diff(c[2], g, 0),
            diff(c[1], g, 0) - diff(c[0], g, 1),
        ]))
    raise GridError("curl needs a 2D or 3D grid")


def fd_laplacian(f: ScalarField) -> ScalarField:
    g = f.grid
    out = None
    for a in range(g.dim):
        term = diff2(f.values, g, a)
        out = term if out is None else out + term
    return ScalarField(g, out)


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class Polyline:
    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, float))
        if pts.shape[0] < 2:
            raise ValueError("a polyline needs at least 2 points")
        if self.closed and np.max(np.abs(pts[0] - pts[-1])) > 1e-12:
            raise ValueError("closed polyline must end where it starts")
        object.__setattr__(self, "points", pts)

    @classmethod
    def circle(cls, center, radius: float, n: int, start_angle: float = 0.0, clockwise=False):
        s = -1.0 if clockwise else 1.0
        t = start_angle + s * np.linspace(0.0, 2 * np.pi, n + 1)
        pts = np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], -1)
        pts[-1] = pts[0]
        return cls(pts, closed=True)

    def reversed(self) -> "Polyline":
        return Polyline(self.points[::-1].copy(), self.closed)

    def then(self, other: "Polyline") -> "Polyline":
        if np.max(np.abs(self.points[-1] - other.points[0])) > 1e-12:
            raise ValueError("paths do not join")
        pts = np.concatenate([self.points, other.points[1:]])
        closed = bool(np.max(np.abs(pts[0] - pts[-1])) <= 1e-12)
        return Polyline(pts, closed)

    def refined(self, refinement: int) -> "Polyline":
        if refinement < 1:
            raise ValueError("refinement must be >= 1")
        a, b = self.points[:-1], self.points[1:]
        t = np.arange(refinement) / refinement
        sub = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        pts = np.concatenate([sub.reshape(-1, a.shape[1]), self.points[-1:]])
        return Polyline(pts, self.closed)

    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def midpoints_and_steps(self, refinement: int = 1):
        p = self.refined(refinement).points
        return 0.5 * (p[1:] + p[:-1]), np.diff(p, axis=0)


def sample_vector_field(v: VectorField, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of ``v`` at (M, dim) points -> (M, dim).

    Raises :class:`PathDomainError` when a point lies outside the grid or in
    a cell that touches a masked node.
    """
    g = v.grid
    pts = np.atleast_2d(np.asarray(points, float))
    lo = np.asarray(g.origin)
    h = np.asarray(g.h)
    n = np.asarray(g.n)
    s = (pts - lo) / h
    tol = 1e-9
    if np.any(s < -tol) or np.any(s > (n - 1) + tol):
        raise PathDomainError("path leaves the grid domain")
    s = np.clip(s, 0, n - 1)
    i0 = np.minimum(np.floor(s).astype(int), n - 2)
    t = s - i0
    valid = g.valid
    vals = np.asarray(v.values)
    out = np.zeros((pts.shape[0], g.dim), dtype=np.result_type(vals.dtype, float))
    for corner in np.ndindex(*(2,) * g.dim):
        c = np.asarray(corner)
        idx = tuple((i0 + c).T)
        if not np.all(valid[idx]):
            raise PathDomainError("path crosses a masked cell")
        w = np.prod(np.where(c == 1, t, 1 - t), axis=1)
        out += w[:, None] * vals[(slice(None),) + idx].T
    return out


def line_integral(v: VectorField | Callable[[np.ndarray], np.ndarray], path: Polyline,
                  refinement: int = 1):
    """Midpoint-rule circulation/work of ``v`` along ``path``.

    ``v`` is either a sampled :class:`VectorField` or a callable mapping an
    (M, dim) array of points to an (M, dim) array of vectors.
    """
    mid, dl = path.midpoints_and_steps(refinement)
    vals = sample_vector_field(v, mid) if isinstance(v, VectorField) else np.asarray(v(mid))
    return np.sum(vals * dl)


# ---------------------------------------------------------------------------
# path-ordered products


def ordered_product(factors: Quaternion) -> Quaternion:
    """Product along the last axis with later factors multiplied on the left.

    ``factors[..., 0]`` acts first: result = f[-1] ... f[1] f[0].
    """
    z = np.asarray(factors.z, complex)
    zeta = np.asarray(factors.zeta, complex)
    z, zeta = np.broadcast_arrays(z, zeta)
    while z.shape[-1] > 1:
        if z.shape[-1] % 2:
            pad = [(0, 0)] * (z.ndim - 1) + [(0, 1)]
            z = np.pad(z, pad, constant_values=1.0)
            zeta = np.pad(zeta, pad, constant_values=0.0)
        early = Quaternion(z[..., 0::2], zeta[..., 0::2])
        late = Quaternion(z[..., 1::2], zeta[..., 1::2])
        prod = quat_mul(late, early)
        z, zeta = prod.z, prod.zeta
    return Quaternion(z[..., 0], zeta[..., 0])


Connection = Callable[[np.ndarray], Quaternion]
"""Maps (M, dim) points to a Quaternion whose arrays have shape (M, dim)."""


def segment_factors(connection: Connection, starts: np.ndarray, ends: np.ndarray,
                    refinement: int) -> Quaternion:
    """Midpoint exponentials exp(Q(mid).dl) for many segments at once.

    Returns a Quaternion of shape (S, refinement), ordered start -> end.
    """
    starts = np.atleast_2d(starts)
    ends = np.atleast_2d(ends)
    t = (np.arange(refinement) + 0.5) / refinement
    d = ends - starts
    mid = starts[:, None, :] + t[None, :, None] * d[:, None, :]
    dl = d / refinement
    S, dim = starts.shape
    q = connection(mid.reshape(-1, dim))
    z = np.asarray(q.z).reshape(S, refinement, dim)
    zeta = np.asarray(q.zeta).reshape(S, refinement, dim)
    u = Quaternion(np.sum(z * dl[:, None, :], -1), np.sum(zeta * dl[:, None, :], -1))
    return quat_exp(u)


def transport_segments(connection: Connection, starts: np.ndarray, ends: np.ndarray,
                       refinement: int = 1) -> Quaternion:
    """Holonomy of each straight segment start -> end, shape (S,)."""
    return ordered_product(segment_factors(connection, starts, ends, refinement))


def path_ordered_product(connection: Connection, path: Polyline, refinement: int = 1) -> Quaternion:
    """Ordered product of exp(Q(midpoint).dl) along ``path``.

    The first segment is applied first; each later factor multiplies from the
    left, so for a pure gauge ``Q = (grad K) K^-1`` the result transports
    ``K(start)`` to ``K(end)``.
    """
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    p = path.points
    factors = segment_factors(connection, p[:-1], p[1:], refinement)
    flat = Quaternion(factors.z.reshape(-1), factors.zeta.reshape(-1))
    return ordered_product(flat)


# ---------------------------------------------------------------------------
# CSV export


def _columns(name: str, values) -> list[tuple[str, np.ndarray]]:
    if isinstance(values, Quaternion):
        r4 = values.real4()
        return [(f"{name}_{c}", r4[..., i]) for i, c in enumerate("wxyk")]
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return [(f"{name}_re", values.real), (f"{name}_im", values.imag)]
    return [(name, values)]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def field_csv(*named_fields: tuple[str, ScalarField | VectorField]) -> str:
    """One row per node: coordinates, then every component of every field."""
    grid = named_fields[0][1].grid
    names = ["x", "y", "z"][: grid.dim]
    cols = [(nm, c) for nm, c in zip(names, grid.coords())]
    for name, f in named_fields:
        if f.grid.shape != grid.shape:
            raise GridError("fields must share a grid")
        if isinstance(f, VectorField):
            vals = f.values
            for a in range(grid.dim):
                comp = vals[a] if isinstance(vals, Quaternion) else vals[a]
                cols.extend(_columns(f"{name}{names[a]}", comp))
        else:
            cols.extend(_columns(name, f.values))
    buf = io.StringIO()
    buf.write(",".join(c[0] for c in cols) + "\n")
    flat = [np.asarray(c[1]).ravel() for c in cols]
    for row in zip(*flat):
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()
