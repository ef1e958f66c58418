"""Masked lattice discretisation shared by the 1D and 2D solvers.

A node is an unknown when it lies strictly inside the polygon and the
height there is at least the floor. Where a neighbour along an axis is
missing, the boundary value zero is imposed at the true crossing of that
axis with the polygon edge, at distance ``delta <= spacing``: linear
extrapolation through the zero turns the stencil's diagonal term
``2/spacing**2`` into ``1/spacing**2 + 1/(spacing * delta)``. The matrix
stays symmetric, and the column blocks of the 2D operator coincide with the
1D cross-section operators on the same lattice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDomain, GridMismatch
from .geometry import ConvexDomain, Lattice

DELTA_FLOOR = 1e-6  # smallest boundary distance, in units of the spacing


def default_spacing(l1_estimate: float) -> float:
    return min(1.0, l1_estimate) / 16.0


def interior_mask(domain: ConvexDomain, potential, xs, ys) -> np.ndarray:
    """Unknowns of the product grid ``xs x ys``: strictly inside and above the height floor."""
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    inside = domain.contains(X, Y, tol=1e-12 * max(1.0, domain.scale), strict=True)
    mask = np.zeros(X.shape, dtype=bool)
    if inside.any():
        h = potential.height(X[inside], Y[inside])
        mask[inside] = h >= potential.h_floor
    return mask


def boundary_coefficients(mask, dist_lo, dist_hi, spacing, axis):
    """Diagonal contribution of the second difference along ``axis``.

    Returns ``(diag, link)`` where ``link[k]`` says whether node ``k`` is
    coupled to its successor along the axis.
    """
    m = np.moveaxis(mask, axis, -1)
    lo = np.moveaxis(dist_lo, axis, -1)
    hi = np.moveaxis(dist_hi, axis, -1)
    inv2 = 1.0 / spacing ** 2
    prev_in = np.zeros_like(m)
    prev_in[..., 1:] = m[..., :-1]
    next_in = np.zeros_like(m)
    next_in[..., :-1] = m[..., 1:]
    floor = DELTA_FLOOR * spacing
    with np.errstate(invalid="ignore"):
        d_lo = np.clip(np.nan_to_num(lo, nan=spacing), floor, spacing)
        d_hi = np.clip(np.nan_to_num(hi, nan=spacing), floor, spacing)
    diag = np.where(prev_in, inv2, 1.0 / (spacing * d_lo)) + np.where(next_in, inv2, 1.0 / (spacing * d_hi))
    diag = np.where(m, diag, 0.0)
    link = m & next_in
    return np.moveaxis(diag, -1, axis), np.moveaxis(link, -1, axis)


def column_distances(domain: ConvexDomain, xs, ys):
    g1, g2, ok = domain.sections(xs)
    Y = np.asarray(ys, float)[None, :]
    lo = np.where(ok[:, None], Y - g1[:, None], np.nan)
    hi = np.where(ok[:, None], g2[:, None] - Y, np.nan)
    return lo, hi, ok


def row_distances(domain: ConvexDomain, xs, ys):
    f1, f2, ok = domain.row_sections(ys)
    X = np.asarray(xs, float)[:, None]
    lo = np.where(ok[None, :], X - f1[None, :], np.nan)
    hi = np.where(ok[None, :], f2[None, :] - X, np.nan)
    return lo, hi


@dataclass
class Grid2D:
    lattice: Lattice
    mask: np.ndarray
    V: np.ndarray  # potential at unknowns, zero elsewhere
    diag_x: np.ndarray
    diag_y: np.ndarray
    link_x: np.ndarray
    link_y: np.ndarray
    section_ok: np.ndarray  # column cross-section nonempty

    @property
    def spacing(self) -> float:
        return self.lattice.spacing

    @property
    def n_unknowns(self) -> int:
        return int(self.mask.sum())

    def index(self) -> np.ndarray:
        idx = np.full(self.mask.shape, -1, dtype=np.int64)
        idx[self.mask] = np.arange(self.n_unknowns)
        return idx

    def scatter(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(self.mask.shape)
        out[self.mask] = values
        return out

    def metadata(self):
        lat = self.lattice
        return {
            "x0": lat.x0,
            "y0": lat.y0,
            "spacing": lat.spacing,
            "nx": lat.nx,
            "ny": lat.ny,
            "unknowns": self.n_unknowns,
        }


def build_grid(domain: ConvexDomain, potential, spacing: float | None = None, lattice: Lattice | None = None) -> Grid2D:
    if lattice is None:
        if spacing is None:
            raise GridMismatch("give a spacing or a lattice")
        lattice = Lattice.covering(domain, spacing)
    elif not lattice.covers(domain):
        raise GridMismatch("lattice does not cover the domain")
    xs, ys = lattice.xs, lattice.ys
    mask = interior_mask(domain, potential, xs, ys)
    if not mask.any():
        raise EmptyDomain("no interior grid nodes; refine the spacing")
    c_lo, c_hi, ok = column_distances(domain, xs, ys)
    r_lo, r_hi = row_distances(domain, xs, ys)
    dy, ly = boundary_coefficients(mask, c_lo, c_hi, lattice.spacing, axis=1)
    dx, lx = boundary_coefficients(mask, r_lo, r_hi, lattice.spacing, axis=0)
    X, Y = lattice.mesh()
    V = np.zeros(mask.shape)
    V[mask] = potential.values(X[mask], Y[mask])
    return Grid2D(lattice, mask, V, dx, dy, lx, ly, ok)
