"""Cross-sectional eigenvalues ``mu(x)`` and the longitudinal surrogate operator.

Smallest eigenvalues of symmetric tridiagonal matrices come from Sturm
counts (the signs of the LDL^T pivots) and bisection; eigenvectors from one
or two steps of shifted inverse iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import AtDomainEdge, CrossSectionTooThin, EigSolveFailed, EmptyDomain
from .geometry import ConvexDomain
from .grid import DELTA_FLOOR, boundary_coefficients, column_distances, interior_mask

MIN_NODES = 3
PIVOT_MIN = 1e-300
REL_BISECT_TOL = 1e-13


@dataclass
class Tridiagonal1D:
    """Symmetric tridiagonal ``T`` with diagonal ``diag`` and off-diagonal ``off``."""

    y: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    spacing: float

    def __post_init__(self):
        self.y = np.asarray(self.y, float)
        self.diag = np.asarray(self.diag, float)
        self.off = np.asarray(self.off, float)
        if len(self.off) != max(len(self.diag) - 1, 0):
            raise ValueError("off-diagonal must have n - 1 entries")

    @property
    def n(self) -> int:
        return len(self.diag)

    @classmethod
    def dirichlet(cls, y, v, spacing: float) -> "Tridiagonal1D":
        """Plain three-point ``-d^2/dy^2 + V`` with zero values one step beyond each end."""
        v = np.asarray(v, float)
        inv2 = 1.0 / spacing ** 2
        return cls(y, 2 * inv2 + v, np.full(max(len(v) - 1, 0), -inv2), spacing)

    def matvec(self, x):
        out = self.diag * x
        out[:-1] += self.off * x[1:]
        out[1:] += self.off * x[:-1]
        return out

    def dense(self):
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def norm_inf(self) -> float:
        a = np.abs(self.diag).copy()
        a[:-1] += np.abs(self.off)
        a[1:] += np.abs(self.off)
        return float(a.max())


@dataclass
class EigenPair1D:
    mu: float
    y: np.ndarray
    psi: np.ndarray
    residual: float


def sturm_counts(diag: np.ndarray, off2: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Eigenvalues below ``sigma`` for a batch of tridiagonals (rows), padded with ``inf``."""
    q = diag[:, 0] - sigma
    q = np.where(q == 0, -PIVOT_MIN, q)
    count = (q < 0).astype(np.int64)
    for k in range(1, diag.shape[1]):
        q = diag[:, k] - sigma - off2[:, k - 1] / q
        q = np.where(q == 0, -PIVOT_MIN, q)
        count += q < 0
    return count


def _pack(systems):
    n = max(s.n for s in systems)
    diag = np.full((len(systems), n), np.inf)
    off2 = np.zeros((len(systems), max(n - 1, 1)))
    for r, s in enumerate(systems):
        diag[r, : s.n] = s.diag
        off2[r, : s.n - 1] = s.off ** 2
    return diag, off2


def first_eig_batch(systems) -> np.ndarray:
    """Smallest eigenvalue of each system; each result has Sturm count zero."""
    if not systems:
        return np.zeros(0)
    diag, off2 = _pack(systems)
    lo = np.empty(len(systems))
    hi = np.empty(len(systems))
    for r, s in enumerate(systems):
        a = np.abs(s.off)
        radius = np.zeros(s.n)
        radius[:-1] += a
        radius[1:] += a
        lo[r] = np.min(s.diag - radius)
        top = np.min(s.diag)
        hi[r] = top + 1e-12 * (1.0 + abs(top))
    for _ in range(400):
        width = hi - lo
        active = width > REL_BISECT_TOL * (1.0 + np.maximum(np.abs(lo), np.abs(hi)))
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        stuck = (mid <= lo) | (mid >= hi)
        active &= ~stuck
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        c = sturm_counts(diag[idx], off2[idx], mid[idx])
        below = c > 0
        hi[idx[below]] = mid[idx[below]]
        lo[idx[~below]] = mid[idx[~below]]
    return lo


def first_eig_1d(tri: Tridiagonal1D) -> float:
    if tri.n < MIN_NODES:
        raise CrossSectionTooThin(f"{tri.n} nodes in the cross-section, need {MIN_NODES}")
    return float(first_eig_batch([tri])[0])


def first_eigfun_1d(tri: Tridiagonal1D, mu: float, max_iter: int = 200) -> EigenPair1D:
    """Inverse iteration at ``mu - 1e-8``; ``psi`` is positive with ``dy * sum(psi**2) = 1``."""
    n = tri.n
    if n < MIN_NODES:
        raise CrossSectionTooThin(f"{n} nodes in the cross-section, need {MIN_NODES}")
    shift = mu - 1e-8
    ab = np.zeros((3, n))
    ab[0, 1:] = tri.off
    ab[1] = tri.diag - shift
    ab[2, :-1] = tri.off
    x = np.ones(n) / np.sqrt(n)
    target = max(1e-8, 1e3 * np.finfo(float).eps * tri.norm_inf())
    res = np.inf
    for _ in range(max_iter):
        z = solve_banded((1, 1), ab, x)
        nz = np.linalg.norm(z)
        if not np.isfinite(nz) or nz == 0:
            break
        x = z / nz
        res = float(np.linalg.norm(tri.matvec(x) - mu * x))
        if res <= target:
            break
    else:
        raise EigSolveFailed(f"inverse iteration stalled, residual {res:.3e}")
    if not res <= target:
        raise EigSolveFailed(f"inverse iteration stalled, residual {res:.3e}")
    if x.sum() < 0:
        x = -x
    scale = 1.0 / np.sqrt(tri.spacing * np.dot(x, x))
    psi = x * scale
    return EigenPair1D(mu, tri.y.copy(), psi, res)


# --- cross-sections of a domain ---------------------------------------------


def _y_nodes(domain: ConvexDomain, dy: float, y0: float | None):
    _, ymin, _, ymax = domain.bbox
    if y0 is None:
        y0 = ymin - dy
    ny = int(np.ceil((ymax - y0) / dy - 1e-9)) + 2
    return y0 + dy * np.arange(ny)


def column_systems(domain: ConvexDomain, potential, xs, dy: float, y0: float | None = None):
    """Cross-section operators at each abscissa, with the boundary treatment of the 2D grid.

    Returns ``(systems, section_ok, ys, mask)``; ``systems[i]`` is ``None`` when
    the column has no unknowns.
    """
    xs = np.atleast_1d(np.asarray(xs, float))
    ys = _y_nodes(domain, dy, y0)
    mask = interior_mask(domain, potential, xs, ys)
    lo, hi, ok = column_distances(domain, xs, ys)
    diag_y, link_y = boundary_coefficients(mask, lo, hi, dy, axis=1)
    systems = []
    for i in range(len(xs)):
        col = mask[i]
        if not col.any():
            systems.append(None)
            continue
        js = np.nonzero(col)[0]
        v = potential.values(np.full(len(js), xs[i]), ys[js])
        coupled = link_y[i, js[:-1]] & (np.diff(js) == 1)
        off = np.where(coupled, -1.0 / dy ** 2, 0.0)
        systems.append(Tridiagonal1D(ys[js], diag_y[i, js] + v, off, dy))
    return systems, ok, ys, mask


@dataclass
class MuProfile:
    x: np.ndarray
    mu: np.ndarray  # nan where the cross-section is empty
    capped: np.ndarray
    nonempty: np.ndarray
    counts: np.ndarray
    spacing: float
    v_max: float

    @property
    def usable(self) -> np.ndarray:
        return self.nonempty & ~self.capped

    @property
    def i_star(self) -> int:
        vals = np.where(self.usable, self.mu, np.inf)
        if not np.isfinite(vals).any():
            raise EmptyDomain("no cross-section carries enough nodes")
        return int(np.argmin(vals))  # leftmost on ties

    @property
    def mu_star(self) -> float:
        return float(self.mu[self.i_star])

    @property
    def x_star(self) -> float:
        return float(self.x[self.i_star])

    def second_differences(self):
        """Second differences of ``mu`` at nodes whose three-point stencil is uncapped."""
        u = self.usable
        ok = u[1:-1] & u[:-2] & u[2:]
        d2 = self.mu[2:] - 2 * self.mu[1:-1] + self.mu[:-2]
        return self.x[1:-1][ok], d2[ok], self.mu[1:-1][ok]

    def convexity_defect(self):
        """``(min second difference, tolerance)``; convex when the first is >= -tolerance."""
        _, d2, mid = self.second_differences()
        if len(d2) == 0:
            return 0.0, 1e-8
        tol = max(1e-8, 10 * self.spacing ** 2 * float(np.max(np.abs(mid))))
        return float(d2.min()), tol

    def rows(self):
        for x, m, c, e in zip(self.x, self.mu, self.capped, self.nonempty):
            if e:
                yield float(x), float(m), bool(c)

    def to_dict(self):
        return {"mu_star": self.mu_star, "x_star": self.x_star, "dx": self.spacing}


def mu_profile(domain: ConvexDomain, potential, x_grid, dy: float, y0: float | None = None) -> MuProfile:
    """``mu(x_j)`` on every abscissa; columns with fewer than three nodes are capped at ``V_max``."""
    xs = np.asarray(x_grid, float)
    systems, ok, _, _ = column_systems(domain, potential, xs, dy, y0)
    counts = np.array([0 if s is None else s.n for s in systems])
    capped = ok & (counts < MIN_NODES)
    solve = [i for i in range(len(xs)) if counts[i] >= MIN_NODES]
    if not solve:
        raise EmptyDomain("every cross-section is empty or thinner than three nodes")
    mu = np.full(len(xs), np.nan)
    mu[capped] = potential.v_max
    mu[solve] = first_eig_batch([systems[i] for i in solve])
    dx = float(xs[1] - xs[0]) if len(xs) > 1 else dy
    return MuProfile(xs, mu, capped, ok, counts, dx, potential.v_max)


def operator_A_system(profile: MuProfile, dx: float | None = None, extent=None) -> Tridiagonal1D:
    """``-d^2/dx^2 + mu(x)`` on the columns that carry unknowns.

    Without ``extent`` the zero value sits one step beyond the end columns.
    With ``extent = (a, b)``, the x-range of the domain, it sits at ``a`` and
    ``b`` through the same cut-cell coefficient the 2D grid uses; every row's
    own boundary distance is at most that, which keeps the 2D eigenvalue above
    this one.
    """
    dx = profile.spacing if dx is None else dx
    carrying = np.nonzero(profile.counts > 0)[0]
    if len(carrying) == 0:
        raise CrossSectionTooThin("no column carries unknowns")
    i0, i1 = carrying[0], carrying[-1] + 1
    mu = profile.mu[i0:i1].copy()
    mu[~np.isfinite(mu) | (profile.counts[i0:i1] < MIN_NODES)] = profile.v_max
    tri = Tridiagonal1D.dirichlet(profile.x[i0:i1], mu, dx)
    if extent is not None:
        a, b = extent
        for k, delta in ((0, profile.x[i0] - a), (-1, b - profile.x[i1 - 1])):
            delta = min(max(delta, DELTA_FLOOR * dx), dx)
            tri.diag[k] += 1.0 / (dx * delta) - 1.0 / dx ** 2
    return tri


def operator_A_first_eig(profile: MuProfile, dx: float | None = None, extent=None) -> float:
    tri = operator_A_system(profile, dx, extent)
    if tri.n < MIN_NODES:
        raise CrossSectionTooThin(f"{tri.n} columns along x, need {MIN_NODES}")
    return float(first_eig_batch([tri])[0])


@dataclass
class DpsiSample:
    x: float
    value: float  # integral of (d psi / dx)^2 over the cross-section
    orthogonality: float  # integral of (d psi / dx) * psi


def _column_eigfun(domain, potential, x, dy, y0):
    systems, _, ys, _ = column_systems(domain, potential, [x], dy, y0)
    s = systems[0]
    if s is None or s.n < MIN_NODES:
        raise AtDomainEdge(f"cross-section at x={x:.6g} is empty or thinner than three nodes")
    pair = first_eigfun_1d(s, first_eig_1d(s))
    full = np.zeros(len(ys))
    full[np.searchsorted(ys, s.y)] = pair.psi
    return ys, full


def dpsi_dx_l2(domain: ConvexDomain, potential, x: float, dx: float, dy: float, y0: float | None = None) -> DpsiSample:
    """Central difference of the normalised cross-sectional ground state in x.

    Each neighbour column is extended by zero outside its own cross-section
    and compared on the shared y-lattice.
    """
    if y0 is None:
        y0 = domain.bbox[1] - dy
    _, minus = _column_eigfun(domain, potential, x - dx, dy, y0)
    _, centre = _column_eigfun(domain, potential, x, dy, y0)
    _, plus = _column_eigfun(domain, potential, x + dx, dy, y0)
    d = (plus - minus) / (2 * dx)
    return DpsiSample(float(x), float(dy * np.dot(d, d)), float(dy * np.dot(d, centre)))
