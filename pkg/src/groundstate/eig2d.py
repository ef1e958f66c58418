"""First Dirichlet eigenpair of ``-Laplacian + V`` on a masked lattice.

The smallest eigenvalue comes from shift-and-invert power iteration whose
inner solves use a preconditioned conjugate gradient. Post-processing covers
column integrals ``H(x)``, superlevel sets and a discrete log-concavity test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from skimage import measure

from .errors import (
    EigSolveFailed,
    EmptyDomain,
    EmptyRegion,
    InvalidDomain,
    LevelEmpty,
    LinearSolveFailed,
    OracleTooLarge,
)
from .geometry import ConvexDomain, Ellipse, RegionMask, chebyshev_center, diameter, john_ellipse, polygon_hull
from .grid import Grid2D, build_grid

ORACLE_LIMIT = 4000


@dataclass
class Operator2D:
    matrix: sp.csr_matrix
    grid: Grid2D

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def assemble_from_grid(grid: Grid2D) -> Operator2D:
    n = grid.n_unknowns
    if n == 0:
        raise EmptyDomain("empty interior mask")
    idx = grid.index()
    h2 = 1.0 / grid.spacing ** 2
    diag = (grid.diag_x + grid.diag_y + grid.V)[grid.mask]
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [diag]
    for link, shift in ((grid.link_x, (1, 0)), (grid.link_y, (0, 1))):
        i, j = np.nonzero(link)
        a = idx[i, j]
        b = idx[i + shift[0], j + shift[1]]
        off = np.full(len(a), -h2)
        rows += [a, b]
        cols += [b, a]
        vals += [off, off]
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    m.sum_duplicates()
    return Operator2D(m, grid)


def assemble_2d(domain: ConvexDomain, potential, lattice_or_spacing) -> Operator2D:
    """Five-point ``-Laplacian + V`` on the unknowns of a lattice (or of a spacing)."""
    if isinstance(lattice_or_spacing, Grid2D):
        return assemble_from_grid(lattice_or_spacing)
    if isinstance(lattice_or_spacing, (int, float)):
        grid = build_grid(domain, potential, spacing=float(lattice_or_spacing))
    else:
        grid = build_grid(domain, potential, lattice=lattice_or_spacing)
    return assemble_from_grid(grid)


def gershgorin_lower(matrix) -> float:
    m = sp.csr_matrix(matrix)
    d = m.diagonal()
    absrow = np.asarray(abs(m).sum(axis=1)).ravel()
    return float(np.min(2 * d - absrow))


# --- linear algebra ----------------------------------------------------------


class _NotPositive(Exception):
    pass


def make_preconditioner(matrix, kind: str = "amg"):
    """Symmetric positive preconditioner as a callable ``r -> M^{-1} r``."""
    if kind == "none":
        return None
    if kind == "jacobi":
        inv = 1.0 / matrix.diagonal()
        return lambda r: inv * r
    if kind == "amg":
        import pyamg

        # "local" weighting bounds the spectral radius row by row; the default
        # estimate starts from np.random.rand and makes runs irreproducible
        smooth = ("jacobi", {"omega": 4.0 / 3.0, "weighting": "local"})
        ml = pyamg.smoothed_aggregation_solver(matrix, symmetry="hermitian", smooth=smooth)
        pre = ml.aspreconditioner(cycle="V")
        return lambda r: pre.matvec(r)
    raise ValueError(f"unknown preconditioner {kind!r}")


def conjugate_gradient(matrix, b, x0=None, precond=None, rtol: float = 1e-10, maxiter: int | None = None):
    """Preconditioned CG; returns ``(x, iterations)``."""
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    x = np.zeros(n) if x0 is None else x0.copy()
    r = b - matrix @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), 0
    target = rtol * bnorm
    if np.linalg.norm(r) <= target:
        return x, 0
    z = precond(r) if precond else r
    p = z.copy()
    rz = r @ z
    for k in range(1, maxiter + 1):
        ap = matrix @ p
        pap = p @ ap
        if not pap > 0:
            raise _NotPositive()
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= target:
            return x, k
        z = precond(r) if precond else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise LinearSolveFailed(f"CG did not reach rtol {rtol:g} in {maxiter} iterations")


# --- eigenpairs ----------------------------------------------------------------


@dataclass
class EigenPair2D:
    lam: float
    u: np.ndarray  # full lattice field, max 1, zero off the mask
    residual: float
    grid: Grid2D
    iterations: int = 0
    shift: float = 0.0
    cg_iterations: int = 0

    @property
    def spacing(self) -> float:
        return self.grid.spacing

    def metadata(self):
        out = {"lambda": self.lam, "residual": self.residual, "iterations": self.iterations}
        out.update(self.grid.metadata())
        return out


def _normalise(vec: np.ndarray) -> np.ndarray:
    if vec.sum() < 0:
        vec = -vec
    return vec / np.max(vec)


def first_eig_2d(
    op: Operator2D,
    shift: float | None = None,
    preconditioner: str = "amg",
    rq_tol: float = 1e-12,
    res_tol: float = 1e-8,
    cg_rtol: float = 1e-10,
    max_outer: int = 500,
) -> EigenPair2D:
    """Smallest eigenpair by inverse iteration on ``A - shift``.

    The default shift is the Gershgorin lower bound, which keeps ``A - shift``
    positive definite. A caller-supplied shift must stay below the smallest
    eigenvalue; if CG meets a non-positive curvature the solve restarts from
    the Gershgorin shift. Convergence needs a relative Rayleigh-quotient
    change below ``rq_tol`` and a residual (unit vector) below ``res_tol``.
    """
    A = op.matrix
    n = op.n
    g = gershgorin_lower(A)
    shifts = [g] if shift is None or shift <= g else [float(shift), g]
    last_error = None
    for sigma in shifts:
        try:
            return _inverse_iteration(op, sigma, preconditioner, rq_tol, res_tol, cg_rtol, max_outer)
        except _NotPositive:
            last_error = f"A - {sigma:.6g} I is not positive definite"
            continue
    raise EigSolveFailed(last_error or "inverse iteration failed")


def _inverse_iteration(op, sigma, preconditioner, rq_tol, res_tol, cg_rtol, max_outer):
    A = op.matrix
    n = op.n
    B = (A - sigma * sp.identity(n, format="csr")).tocsr()
    M = make_preconditioner(B, preconditioner) if n > 1 else None
    x = np.ones(n) / np.sqrt(n)
    rho_old = float(x @ (A @ x))
    total_cg = 0
    res = np.inf
    for k in range(1, max_outer + 1):
        guess = x / max(rho_old - sigma, 1e-300)
        z, its = conjugate_gradient(B, x, guess, M, cg_rtol, 10 * n)
        total_cg += its
        x = z / np.linalg.norm(z)
        ax = A @ x
        rho = float(x @ ax)
        res = float(np.linalg.norm(ax - rho * x))
        if abs(rho - rho_old) < rq_tol * max(1.0, abs(rho)) and res <= res_tol:
            u = op.grid.scatter(_normalise(x))
            return EigenPair2D(rho, u, res, op.grid, k, sigma, total_cg)
        rho_old = rho
    raise EigSolveFailed(f"no convergence in {max_outer} steps (residual {res:.3e})")


def dense_oracle_2d(op: Operator2D):
    """Full symmetric eigendecomposition; ``(lambda, u)`` with u max-normalised and positive."""
    if op.n > ORACLE_LIMIT:
        raise OracleTooLarge(f"{op.n} unknowns exceed the oracle limit of {ORACLE_LIMIT}")
    w, v = eigh(op.matrix.toarray(), subset_by_index=[0, 0])
    return float(w[0]), op.grid.scatter(_normalise(v[:, 0]))


def rayleigh_quotient(op: Operator2D, u: np.ndarray) -> float:
    x = u[op.grid.mask]
    return float(x @ (op.matrix @ x) / (x @ x))


def residual_norm(op: Operator2D, u: np.ndarray, lam: float) -> float:
    x = u[op.grid.mask]
    x = x / np.linalg.norm(x)
    return float(np.linalg.norm(op.matrix @ x - lam * x))


# --- post-processing -----------------------------------------------------------


@dataclass
class HProfile:
    x: np.ndarray
    H: np.ndarray

    @property
    def A_max(self) -> float:
        return float(self.H.max())

    @property
    def i_max(self) -> int:
        return int(np.argmax(self.H))

    def rows(self):
        for x, h in zip(self.x, self.H):
            yield float(x), float(h)


def h_profile(pair: EigenPair2D, grid: Grid2D | None = None) -> HProfile:
    """Column integrals of ``u**2`` (trapezoid rule; u vanishes at both ends)."""
    grid = pair.grid if grid is None else grid
    H = grid.spacing * np.sum(pair.u ** 2, axis=1)
    return HProfile(grid.lattice.xs.copy(), H)


def hull_area_ratio(region: RegionMask):
    """``(mask area / hull area of its cells, threshold)``; threshold is ``1 - 5 spacing perimeter/area``."""
    hull = region.hull_polygon(cells=True)
    ratio = region.area / hull.area
    threshold = 1.0 - 5.0 * region.lattice.spacing * hull.perimeter / hull.area
    return float(ratio), float(threshold)


@dataclass
class LevelSetReport:
    level: float
    contours: list
    mask: np.ndarray
    x_extent: float
    y_extent: float
    inradius: float
    diameter: float
    ellipse: Ellipse | None
    hull_ratio: float
    hull_threshold: float

    @property
    def eccentricity(self) -> float:
        return self.diameter / self.inradius if self.inradius > 0 else float("inf")

    def to_dict(self):
        return {
            "level": self.level,
            "x_extent": self.x_extent,
            "y_extent": self.y_extent,
            "inradius": self.inradius,
            "diameter": self.diameter,
            "eccentricity": self.eccentricity,
            "john_ellipse": None if self.ellipse is None else self.ellipse.to_dict(),
            "hull_area_ratio": self.hull_ratio,
            "hull_area_threshold": self.hull_threshold,
            "nodes": int(self.mask.sum()),
        }


def level_set(pair: EigenPair2D, c: float) -> LevelSetReport:
    """Contour ``u = c`` and measurements of the superlevel set ``{u >= c}``."""
    if not 0 < c < 1:
        raise ValueError("level must lie in (0, 1)")
    grid = pair.grid
    lat = grid.lattice
    mask = (pair.u >= c) & grid.mask
    if not mask.any():
        raise LevelEmpty(f"no node with u >= {c}")
    padded = np.pad(pair.u, 1)
    raw = measure.find_contours(padded, c)
    contours = [
        np.column_stack([lat.x0 + (cc[:, 0] - 1) * lat.spacing, lat.y0 + (cc[:, 1] - 1) * lat.spacing])
        for cc in raw
    ]
    region = RegionMask(lat, mask)
    pts = np.vstack(contours) if contours else region.points()
    x_extent = float(np.ptp(pts[:, 0]))
    y_extent = float(np.ptp(pts[:, 1]))
    try:
        hull = polygon_hull(pts)
        r = chebyshev_center(hull)[1]
        diam = diameter(hull)
        ell = john_ellipse(hull)
    except (EmptyRegion, InvalidDomain):  # fewer than three independent contour points
        hull = None
        r = 0.5 * lat.spacing
        diam = diameter(region)
        ell = None
    ratio, threshold = hull_area_ratio(region)
    return LevelSetReport(c, contours, mask, x_extent, y_extent, r, diam, ell, ratio, threshold)


@dataclass
class LogConcavityReport:
    tolerance: float
    max_second_difference: dict
    violations: dict
    tested_nodes: int
    hull_ratios: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        lc = all(v == 0 for v in self.violations.values())
        hulls = all(r >= t for r, t in self.hull_ratios.values())
        return lc and hulls

    def to_dict(self):
        return {
            "tolerance": self.tolerance,
            "max_second_difference": self.max_second_difference,
            "violations": self.violations,
            "tested_nodes": self.tested_nodes,
            "hull_ratios": {str(k): list(v) for k, v in self.hull_ratios.items()},
            "passed": self.passed,
        }


DIRECTIONS = {"x": (1, 0), "y": (0, 1), "diag": (1, 1), "antidiag": (1, -1)}


def _shift(a, di, dj, fill):
    out = np.full_like(a, fill)
    nx, ny = a.shape
    src = a[max(di, 0) : nx + min(di, 0), max(dj, 0) : ny + min(dj, 0)]
    out[max(-di, 0) : nx + min(-di, 0), max(-dj, 0) : ny + min(-dj, 0)] = src
    return out


def log_concavity_check(
    pair: EigenPair2D, floor: float = 1e-8, levels=(0.1, 0.25, 0.5, 0.75, 0.9), field_override=None
) -> LogConcavityReport:
    """Second differences of ``log u`` along x, y and both diagonals against ``10 dx max|grad log u|``."""
    u = pair.u if field_override is None else field_override
    grid = pair.grid
    h = grid.spacing
    ok = grid.mask & (u > floor)
    logu = np.where(ok, np.log(np.where(ok, u, 1.0)), np.nan)
    grad = np.zeros_like(u)
    for di, dj in ((1, 0), (0, 1)):
        fwd = _shift(logu, -di, -dj, np.nan)
        bwd = _shift(logu, di, dj, np.nan)
        g = np.abs(fwd - bwd) / (2 * h)
        grad = np.fmax(grad, np.nan_to_num(g, nan=0.0))
    gmax = float(grad[ok].max()) if ok.any() else 0.0
    tol = 10 * h * gmax
    maxima, violations = {}, {}
    for name, (di, dj) in DIRECTIONS.items():
        fwd = _shift(logu, -di, -dj, np.nan)
        bwd = _shift(logu, di, dj, np.nan)
        d2 = fwd - 2 * logu + bwd
        valid = np.isfinite(d2)
        maxima[name] = float(d2[valid].max()) if valid.any() else float("-inf")
        violations[name] = int(np.sum(d2[valid] > tol))
    ratios = {}
    for c in levels:
        m = grid.mask & (u >= c)
        if m.sum() >= 3:
            try:
                ratios[c] = hull_area_ratio(RegionMask(grid.lattice, m))
            except (EmptyRegion, InvalidDomain):
                continue
    return LogConcavityReport(tol, maxima, violations, int(ok.sum()), ratios)


def gradient(u: np.ndarray, mask: np.ndarray, spacing: float):
    """Central differences inside the mask, one-sided where a neighbour is missing."""
    out = []
    for di, dj in ((1, 0), (0, 1)):
        nxt = _shift(u, -di, -dj, 0.0)
        prv = _shift(u, di, dj, 0.0)
        n_in = _shift(mask, -di, -dj, False)
        p_in = _shift(mask, di, dj, False)
        g = np.where(
            n_in & p_in,
            (nxt - prv) / (2 * spacing),
            np.where(n_in, (nxt - u) / spacing, np.where(p_in, (u - prv) / spacing, 0.0)),
        )
        out.append(np.where(mask, g, 0.0))
    return out[0], out[1]
