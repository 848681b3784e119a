"""Masked uniform grids over bounded planar domains and the Dirichlet Green operator.

Cells are indexed ``[ix, iy]``; masked cells are stored in C order, i.e. the
order of ``np.nonzero(mask)``. All grid integrals are cell sums times ``h**2``.

The discrete Green operator is the inverse of the 5-point Dirichlet Laplacian
on the masked cells. Where the geometry is known analytically (disc,
rectangle) the boundary is closed with the symmetric cut-cell rule: a cell
whose neighbour lies outside ``D`` sees the boundary at the true distance
``theta * h`` along the grid line, which only changes the diagonal and so keeps
the matrix symmetric positive definite. Custom masks fall back to ``theta = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

TWO_PI = 2.0 * math.pi

# 8 directions at 45 degree spacing; averaging a harmonic function over them
# is exact up to the cos(8 theta) harmonic and cancels the cos(4 theta)
# anisotropy of the 5-point lattice Green function.
_MEAN_VALUE_DIRS = np.array(
    [[math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)] for k in range(8)]
)


class DomainError(ValueError):
    """Invalid geometry, grid mismatch, or a point outside the domain."""


class GreenSolveError(RuntimeError):
    """The Poisson solve did not reach the residual tolerance."""


# --------------------------------------------------------------------------
# geometries


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    kind = "disc"

    def validate(self) -> None:
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise DomainError(f"disc radius must be positive, got radius={self.radius}")

    @property
    def min_diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def bbox(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        r = self.radius
        return cx - r, cy - r, cx + r, cy + r

    def contains(self, x, y):
        cx, cy = self.center
        return (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2 < self.radius**2

    def boundary_distance(self, p) -> float:
        cx, cy = self.center
        return self.radius - math.hypot(p[0] - cx, p[1] - cy)

    def ray_fraction(self, x, y, dx, dy):
        """Fraction t in (0, 1] at which x + t*(dx, dy) meets the circle."""
        cx, cy = self.center
        px, py = x - cx, y - cy
        a = dx * dx + dy * dy
        b = 2.0 * (px * dx + py * dy)
        c = px * px + py * py - self.radius**2
        return (-b + np.sqrt(np.maximum(b * b - 4 * a * c, 0.0))) / (2 * a)

    def project_inside(self, p, margin: float) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        d = np.asarray(p, dtype=float) - c
        r = float(np.hypot(*d))
        rmax = self.radius - margin
        if r <= rmax:
            return np.asarray(p, dtype=float)
        return c + d * (rmax / r)

    def describe(self) -> dict:
        return {"kind": "disc", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Rectangle:
    width: float = 1.0
    height: float = 1.0
    corner: tuple[float, float] = (0.0, 0.0)

    kind = "rectangle"

    def validate(self) -> None:
        for name in ("width", "height"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"rectangle {name} must be positive, got {name}={v}")

    @property
    def min_diameter(self) -> float:
        return min(self.width, self.height)

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def area(self) -> float:
        return self.width * self.height

    def bbox(self):
        x0, y0 = self.corner
        return x0, y0, x0 + self.width, y0 + self.height

    def contains(self, x, y):
        x0, y0, x1, y1 = self.bbox()
        x = np.asarray(x)
        y = np.asarray(y)
        return (x > x0) & (x < x1) & (y > y0) & (y < y1)

    def boundary_distance(self, p) -> float:
        x0, y0, x1, y1 = self.bbox()
        return min(p[0] - x0, x1 - p[0], p[1] - y0, y1 - p[1])

    def ray_fraction(self, x, y, dx, dy):
        x0, y0, x1, y1 = self.bbox()
        t = np.ones_like(np.asarray(x, dtype=float))
        if dx > 0:
            t = (x1 - x) / dx
        elif dx < 0:
            t = (x0 - x) / dx
        elif dy > 0:
            t = (y1 - y) / dy
        elif dy < 0:
            t = (y0 - y) / dy
        return t

    def project_inside(self, p, margin: float) -> np.ndarray:
        x0, y0, x1, y1 = self.bbox()
        return np.array(
            [np.clip(p[0], x0 + margin, x1 - margin), np.clip(p[1], y0 + margin, y1 - margin)]
        )

    def describe(self) -> dict:
        return {
            "kind": "rectangle",
            "width": self.width,
            "height": self.height,
            "corner": list(self.corner),
        }


@dataclass(frozen=True, eq=False)
class CustomMask:
    """A user-supplied boolean cell mask on a grid with the given spacing and origin."""

    mask: np.ndarray
    spacing: float
    origin: tuple[float, float] = (0.0, 0.0)

    kind = "custom"

    def validate(self) -> None:
        if not (self.spacing > 0):
            raise DomainError(f"custom mask spacing must be positive, got spacing={self.spacing}")
        if np.asarray(self.mask).ndim != 2:
            raise DomainError("custom mask must be a 2-D boolean array")
        if not np.asarray(self.mask).any():
            raise DomainError("custom mask is empty")

    @property
    def _dist(self) -> np.ndarray:
        # distance from each masked cell center to the nearest unmasked center
        m = np.pad(np.asarray(self.mask, dtype=bool), 1)
        return ndimage.distance_transform_edt(m)[1:-1, 1:-1] * self.spacing

    @property
    def min_diameter(self) -> float:
        return 2.0 * float(self._dist.max())

    @property
    def diameter(self) -> float:
        ix, iy = np.nonzero(self.mask)
        return math.hypot(np.ptp(ix) + 1, np.ptp(iy) + 1) * self.spacing

    @property
    def area(self) -> float:
        return float(np.count_nonzero(self.mask)) * self.spacing**2

    def bbox(self):
        nx, ny = np.shape(self.mask)
        x0, y0 = self.origin
        return x0, y0, x0 + nx * self.spacing, y0 + ny * self.spacing

    def _cell(self, x, y):
        x0, y0 = self.origin
        return (
            np.floor((np.asarray(x) - x0) / self.spacing).astype(int),
            np.floor((np.asarray(y) - y0) / self.spacing).astype(int),
        )

    def contains(self, x, y):
        shape = np.shape(x)
        ix, iy = self._cell(np.ravel(x), np.ravel(y))
        nx, ny = np.shape(self.mask)
        ok = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
        out = np.zeros(ix.shape, dtype=bool)
        out[ok] = np.asarray(self.mask)[ix[ok], iy[ok]]
        return out.reshape(shape)

    def boundary_distance(self, p) -> float:
        if not bool(self.contains(p[0], p[1])):
            return -1.0
        ix, iy = self._cell(p[0], p[1])
        return float(self._dist[ix, iy]) - 0.5 * self.spacing

    def ray_fraction(self, x, y, dx, dy):
        return np.ones_like(np.asarray(x, dtype=float))

    def project_inside(self, p, margin: float) -> np.ndarray:
        if self.boundary_distance(p) >= margin:
            return np.asarray(p, dtype=float)
        d = self._dist - 0.5 * self.spacing
        ok = np.argwhere(d >= margin)
        if len(ok) == 0:
            raise DomainError("custom mask has no cells beyond the requested margin")
        x0, y0 = self.origin
        centers = np.column_stack(
            [x0 + (ok[:, 0] + 0.5) * self.spacing, y0 + (ok[:, 1] + 0.5) * self.spacing]
        )
        k = np.argmin(((centers - np.asarray(p)) ** 2).sum(axis=1))
        return centers[k]

    def describe(self) -> dict:
        return {
            "kind": "custom",
            "shape": list(np.shape(self.mask)),
            "spacing": self.spacing,
            "origin": list(self.origin),
        }


Geometry = Disc | Rectangle | CustomMask


# --------------------------------------------------------------------------
# grid


@dataclass(frozen=True, eq=False)
class DomainGrid:
    shape: tuple[int, int]
    spacing: float
    origin: tuple[float, float]
    mask: np.ndarray
    geometry: Geometry
    resolution: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def h(self) -> float:
        return self.spacing

    @property
    def cell_area(self) -> float:
        return self.spacing**2

    @property
    def n_cells(self) -> int:
        return int(self._index()[0].size)

    def _index(self):
        if "nz" not in self._cache:
            self._cache["nz"] = np.nonzero(self.mask)
        return self._cache["nz"]

    @property
    def ix(self) -> np.ndarray:
        return self._index()[0]

    @property
    def iy(self) -> np.ndarray:
        return self._index()[1]

    @property
    def x(self) -> np.ndarray:
        """x coordinates of masked cell centers."""
        return self.origin[0] + (self.ix + 0.5) * self.spacing

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + (self.iy + 0.5) * self.spacing

    @property
    def index_map(self) -> np.ndarray:
        """Full-grid array holding the masked-cell number, or -1 outside."""
        if "imap" not in self._cache:
            imap = np.full(self.shape, -1, dtype=np.int64)
            imap[self.mask] = np.arange(self.n_cells)
            imap.setflags(write=False)
            self._cache["imap"] = imap
        return self._cache["imap"]

    @property
    def area(self) -> float:
        """Area of the declared geometry, |D|."""
        return self.geometry.area

    @property
    def diameter(self) -> float:
        return self.geometry.diameter

    def to_full(self, values: np.ndarray, fill: float = 0.0) -> np.ndarray:
        out = np.full(self.shape, fill, dtype=float)
        out[self.mask] = values
        return out

    def contains(self, p) -> bool:
        return bool(self.geometry.contains(p[0], p[1]))

    def boundary_distance(self, p) -> float:
        return float(self.geometry.boundary_distance(p))

    def require_inside(self, p, what: str = "point") -> None:
        if not self.contains(p) or self.boundary_distance(p) <= 0:
            raise DomainError(f"{what} {tuple(np.round(p, 12))} is not strictly inside the domain")

    def same_grid(self, other: "DomainGrid") -> bool:
        return other is self or (
            self.shape == other.shape
            and self.spacing == other.spacing
            and self.origin == other.origin
            and np.array_equal(self.mask, other.mask)
        )

    def describe(self) -> dict:
        return {
            "geometry": self.geometry.describe(),
            "shape": list(self.shape),
            "spacing": self.spacing,
            "origin": list(self.origin),
            "resolution": self.resolution,
            "n_cells": self.n_cells,
        }


def build_domain(geometry: Geometry, resolution: int | None = None) -> DomainGrid:
    """Lay a uniform cell-centered grid over ``geometry``.

    ``resolution`` is the number of cells across the smallest diameter of the
    domain (the disc diameter, the shorter rectangle side), so the unit disc
    at resolution 128 has spacing 1/64. It is ignored for :class:`CustomMask`.
    """
    geometry.validate()
    if isinstance(geometry, CustomMask):
        mask = np.array(geometry.mask, dtype=bool)
        h = float(geometry.spacing)
        origin = (float(geometry.origin[0]), float(geometry.origin[1]))
        resolution = None
    else:
        if resolution is None or resolution < 16:
            raise DomainError(f"resolution must be >= 16 cells across, got resolution={resolution}")
        h = geometry.min_diameter / resolution
        x0, y0, x1, y1 = geometry.bbox()
        nx = int(math.ceil((x1 - x0) / h - 1e-9))
        ny = int(math.ceil((y1 - y0) / h - 1e-9))
        origin = (float(x0), float(y0))
        xc = x0 + (np.arange(nx) + 0.5) * h
        yc = y0 + (np.arange(ny) + 0.5) * h
        X, Y = np.meshgrid(xc, yc, indexing="ij")
        mask = np.asarray(geometry.contains(X, Y), dtype=bool)
    if not mask.any():
        raise DomainError("geometry produced an empty mask; increase resolution")
    _, ncomp = ndimage.label(mask)
    if ncomp != 1:
        raise DomainError(f"masked region must be 4-connected, found {ncomp} components")
    mask.setflags(write=False)
    return DomainGrid(
        shape=tuple(mask.shape), spacing=h, origin=origin, mask=mask,
        geometry=geometry, resolution=resolution,
    )


def dirichlet_laplacian(domain: DomainGrid) -> sp.csc_matrix:
    """Symmetric positive definite matrix of -Laplacian on the masked cells."""
    h = domain.spacing
    imap = domain.index_map
    nx, ny = domain.shape
    ix, iy = domain.ix, domain.iy
    n = domain.n_cells
    p = np.arange(n)
    xc, yc = domain.x, domain.y
    diag = np.zeros(n)
    rows, cols = [p], [p]
    offd = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        jx, jy = ix + di, iy + dj
        inb = (jx >= 0) & (jx < nx) & (jy >= 0) & (jy < ny)
        nb = np.full(n, -1, dtype=np.int64)
        nb[inb] = imap[jx[inb], jy[inb]]
        inside = nb >= 0
        rows.append(p[inside])
        cols.append(nb[inside])
        offd.append(-np.ones(int(inside.sum())))
        diag[inside] += 1.0
        out = ~inside
        if out.any():
            theta = domain.geometry.ray_fraction(xc[out], yc[out], di * h, dj * h)
            theta = np.clip(np.asarray(theta, dtype=float), 1e-3, 1.0)
            diag[out] += 1.0 / theta
    vals = np.concatenate([diag] + offd)
    A = sp.csc_matrix((vals, (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return A / h**2


# --------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class StreamField:
    values: np.ndarray
    domain: DomainGrid

    def full(self) -> np.ndarray:
        return self.domain.to_full(self.values)


@dataclass(frozen=True, eq=False)
class VorticityField:
    values: np.ndarray
    domain: DomainGrid

    @property
    def circulation(self) -> float:
        return float(self.values.sum() * self.domain.cell_area)

    def full(self) -> np.ndarray:
        return self.domain.to_full(self.values)


def dump_grid_csv(path, field_: StreamField | VorticityField) -> None:
    """Write ``x,y,value`` rows over masked cells with 17 significant digits."""
    d = field_.domain
    data = np.column_stack([d.x, d.y, field_.values])
    with open(path, "w", newline="\n") as fh:
        fh.write("x,y,value\n")
        for row in data:
            fh.write(f"{row[0]:.17g},{row[1]:.17g},{row[2]:.17g}\n")


# --------------------------------------------------------------------------
# Green operator


BACKENDS = ("analytic-disc", "finite-difference")


class GreenOperator:
    """Green operator of -Laplacian with zero Dirichlet data on ``domain``.

    ``apply`` always uses the cached sparse factorization of the discrete
    Dirichlet Laplacian. Pointwise queries (``green_point``, ``regular_part``,
    ``robin`` and their gradients) use the image formula on the
    ``analytic-disc`` backend and column solves on ``finite-difference``.
    """

    def __init__(self, domain: DomainGrid, backend: str = "finite-difference", rtol: float = 1e-9):
        if backend not in BACKENDS:
            raise DomainError(f"unknown Green backend {backend!r}; expected one of {BACKENDS}")
        if backend == "analytic-disc" and not isinstance(domain.geometry, Disc):
            raise DomainError("analytic-disc backend requires a disc geometry")
        self.domain = domain
        self.backend = backend
        self.rtol = rtol
        self._lu = None
        self._matrix = None
        self._columns: dict = {}

    # -- linear solve ------------------------------------------------------

    @property
    def matrix(self) -> sp.csc_matrix:
        if self._matrix is None:
            self._matrix = dirichlet_laplacian(self.domain)
        return self._matrix

    @property
    def factorization(self):
        if self._lu is None:
            self._lu = spla.splu(self.matrix, permc_spec="MMD_AT_PLUS_A")
        return self._lu

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Solve the discrete -Lap u = values; returns u on masked cells."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.domain.n_cells,):
            raise DomainError(
                f"field has shape {values.shape}, grid has {self.domain.n_cells} cells"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("field contains non-finite values")
        u = self.factorization.solve(values)
        scale = np.abs(values).max()
        if scale > 0:
            res = np.abs(self.matrix @ u - values).max() / scale
            if not res <= self.rtol:
                raise GreenSolveError(f"Poisson solve residual {res:.3e} exceeds {self.rtol:.1e}")
        return u

    # -- pointwise kernel -------------------------------------------------

    def _disc_coords(self, p):
        g = self.domain.geometry
        return (np.asarray(p, dtype=float) - np.asarray(g.center)) / g.radius, g.radius

    def _bilinear(self, p):
        """Cell numbers and weights interpolating at p from cell centers."""
        d = self.domain
        fx = (p[0] - d.origin[0]) / d.spacing - 0.5
        fy = (p[1] - d.origin[1]) / d.spacing - 0.5
        i0, j0 = int(math.floor(fx)), int(math.floor(fy))
        tx, ty = fx - i0, fy - j0
        nx, ny = d.shape
        idx, w = [], []
        for di, dj, ww in ((0, 0, (1 - tx) * (1 - ty)), (1, 0, tx * (1 - ty)),
                           (0, 1, (1 - tx) * ty), (1, 1, tx * ty)):
            i, j = i0 + di, j0 + dj
            if 0 <= i < nx and 0 <= j < ny and d.mask[i, j]:
                idx.append(int(d.index_map[i, j]))
                w.append(ww)
        return np.array(idx, dtype=np.int64), np.array(w)

    def _column(self, y) -> np.ndarray:
        key = (float(y[0]), float(y[1]))
        col = self._columns.get(key)
        if col is None:
            idx, w = self._bilinear(y)
            rhs = np.zeros(self.domain.n_cells)
            rhs[idx] = w / self.domain.cell_area
            col = self.apply(rhs)
            if len(self._columns) > 256:
                self._columns.clear()
            self._columns[key] = col
        return col

    def _fd_green(self, x, y) -> float:
        # symmetric in (x, y): w(x)^T A^{-1} w(y) / h^2
        idx, w = self._bilinear(x)
        return float(w @ self._column(y)[idx])

    def _check_pair(self, x, y):
        self.domain.require_inside(x, "x")
        self.domain.require_inside(y, "y")

    def green(self, x, y) -> float:
        self._check_pair(x, y)
        if math.hypot(x[0] - y[0], x[1] - y[1]) == 0.0:
            raise DomainError("G(x, y) is singular at x = y")
        if self.backend == "analytic-disc":
            xs, _ = self._disc_coords(x)
            ys, _ = self._disc_coords(y)
            r = math.hypot(*(xs - ys))
            return -math.log(r) / TWO_PI - _disc_h(xs, ys)
        return self._fd_green(x, y)

    def regular(self, x, y) -> float:
        self._check_pair(x, y)
        if self.backend == "analytic-disc":
            xs, R = self._disc_coords(x)
            ys, _ = self._disc_coords(y)
            return _disc_h(xs, ys) - math.log(R) / TWO_PI
        h = self.domain.spacing
        r = math.hypot(x[0] - y[0], x[1] - y[1])
        if r >= 4 * h:
            return -math.log(r) / TWO_PI - self._fd_green(x, y)
        if r == 0.0:
            return self._fd_diagonal(x)
        # h(x, .) is harmonic: average it on a circle around y kept clear of x
        return self._fd_circle_mean(x, np.asarray(y, dtype=float), 8 * h)

    def _fd_circle_mean(self, x, center, delta) -> float:
        vals = []
        for e in _MEAN_VALUE_DIRS:
            z = center + delta * e
            vals.append(-math.log(math.hypot(x[0] - z[0], x[1] - z[1])) / TWO_PI
                        - self._fd_green(z, x))
        return float(np.mean(vals))

    def _fd_diagonal(self, x) -> float:
        h = self.domain.spacing
        dist = self.domain.boundary_distance(x)
        d2 = min(8 * h, 0.9 * dist)
        d1 = 0.5 * d2
        x = np.asarray(x, dtype=float)
        m1 = self._fd_circle_mean(x, x, d1)
        m2 = self._fd_circle_mean(x, x, d2)
        # lattice error decays like (h / delta)^2
        return (4.0 * m2 - m1) / 3.0

    def robin(self, x) -> float:
        self.domain.require_inside(x, "x")
        if self.backend == "finite-difference" and self.domain.boundary_distance(x) <= self.domain.spacing:
            raise DomainError("x is within one grid cell of the boundary")
        return self.regular(x, x)

    def grad1_regular(self, x, y) -> np.ndarray:
        """Gradient of h(x, y) in its first slot."""
        self._check_pair(x, y)
        if self.backend == "analytic-disc":
            xs, R = self._disc_coords(x)
            ys, _ = self._disc_coords(y)
            return _disc_grad1_h(xs, ys) / R
        s = self._fd_step()
        e = np.eye(2)
        x = np.asarray(x, dtype=float)
        return np.array([(self.regular(x + s * e[k], y) - self.regular(x - s * e[k], y)) / (2 * s)
                         for k in range(2)])

    def grad1_green(self, x, y) -> np.ndarray:
        """Gradient of G(x, y) in its first slot."""
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        r2 = float(d @ d)
        if r2 == 0.0:
            raise DomainError("grad G(x, y) is singular at x = y")
        return -d / (TWO_PI * r2) - self.grad1_regular(x, y)

    def robin_grad(self, x) -> np.ndarray:
        self.domain.require_inside(x, "x")
        if self.backend == "analytic-disc":
            xs, R = self._disc_coords(x)
            return 2.0 * _disc_grad1_h(xs, xs) / R
        s = self._fd_step()
        if self.domain.boundary_distance(x) <= s + self.domain.spacing:
            raise DomainError("x is too close to the boundary for the Robin gradient stencil")
        e = np.eye(2)
        x = np.asarray(x, dtype=float)
        return np.array([(self.robin(x + s * e[k]) - self.robin(x - s * e[k])) / (2 * s)
                         for k in range(2)])

    def _fd_step(self) -> float:
        return max(2 * self.domain.spacing, 1e-4 * self.domain.diameter)


def _disc_h(xs, ys) -> float:
    """Regular part of the unit-disc Green function."""
    q = 1.0 - 2.0 * float(xs @ ys) + float(xs @ xs) * float(ys @ ys)
    return -math.log(q) / (2.0 * TWO_PI)


def _disc_grad1_h(xs, ys) -> np.ndarray:
    q = 1.0 - 2.0 * float(xs @ ys) + float(xs @ xs) * float(ys @ ys)
    return -(-2.0 * ys + 2.0 * float(ys @ ys) * xs) / (2.0 * TWO_PI * q)


# --------------------------------------------------------------------------
# module-level operations


def green_apply(op: GreenOperator, omega: VorticityField) -> StreamField:
    if not op.domain.same_grid(omega.domain):
        raise DomainError("vorticity field lives on a different grid than the Green operator")
    return StreamField(op.apply(omega.values), op.domain)


def green_point(op: GreenOperator, x: Sequence[float], y: Sequence[float]) -> float:
    return op.green(x, y)


def regular_part(op: GreenOperator, x: Sequence[float], y: Sequence[float]) -> float:
    return op.regular(x, y)


def robin(op: GreenOperator, x: Sequence[float]) -> float:
    return op.robin(x)


def robin_grad(op: GreenOperator, x: Sequence[float]) -> np.ndarray:
    return op.robin_grad(x)
