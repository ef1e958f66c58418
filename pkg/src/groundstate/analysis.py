"""Numerical checks of the eigenvalue, decay and shape inequalities on a solved instance.

Every check returns ``CheckResult`` records whose measured values are
dimensionless: lengths are divided by ``L1`` or ``L2`` and eigenvalue gaps
are multiplied by ``L1**2`` or ``L2**2``. Smooth cut-offs are replaced by
sharp windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.csgraph import dijkstra

from .checks import CheckResult
from .eig2d import EigenPair2D, HProfile, gradient, level_set
from .errors import AtDomainEdge, CrossSectionTooThin, LevelEmpty
from .grid import Grid2D
from .sturm1d import MuProfile, dpsi_dx_l2


@dataclass
class Tolerances:
    C_max: float = 50.0  # eigenvalue gap times L2**2
    decay_C: float = 1.0  # fit H beyond decay_C * L2 from x*
    mass_floor: float = 0.05
    mass_ceiling: float = 20.0
    ratio_ceiling: float = 50.0
    K_shape: float = 6.0
    level_margin: float = 0.1
    c_star_floor: float = 0.01
    gradient_ceiling: float = 20.0
    eps_floor: float = 0.05
    eps_ceiling: float = 20.0
    agmon_C: float = 16.0
    C_agmon: float = 100.0
    agmon_u_floor: float = 1e-8  # below this u is not resolved by the iterative solve
    C_psi: float = 50.0
    C_tilde: float = 8.0


# --- eigenvalue ----------------------------------------------------------------


def verify_eigenvalue_bounds(lam: float, mu: float, L1: float, L2: float, spacing: float, C_max: float = 50.0):
    eps = 10 * spacing ** 2 * lam
    c_meas = (lam - mu) * L2 ** 2
    lower_ok = lam >= mu - eps
    sandwich = CheckResult(
        "eigenvalue_sandwich",
        "the ground-state energy lies between mu and mu + C L2^-2",
        {"C_meas": c_meas, "(mu - lambda)/(10 dx^2 lambda)": (mu - lam) / eps},
        {"C_max": C_max, "lower_slack": eps},
        bool(lower_ok and c_meas <= C_max),
        notes="" if lower_ok else "lambda falls below mu by more than the discretisation slack",
    )
    ground = CheckResult(
        "eigenvalue_vs_L1",
        "the ground-state energy lies between 1 and 1 + C L1^-2",
        {"(lambda - 1) L1^2": (lam - 1) * L1 ** 2},
        {"lambda_min": 1.0},
        bool(lam >= 1.0),
    )
    return [sandwich, ground]


# --- longitudinal decay ----------------------------------------------------------


def carleman_tolerance(H, mu_gap, spacing) -> float:
    return 10 * spacing ** 2 * float(np.max(np.abs(H))) * float(np.max(np.abs(mu_gap)))


def residual_allowance(pair: EigenPair2D) -> float:
    """Bound on how far an inexact eigenvector can push ``H''`` below ``2 (mu - lambda) H``.

    With ``A u = lambda u + r`` the column identity picks up ``-2 dx <u_i, r_i>``,
    bounded by ``2 dx max_i |u_i| |r|``.
    """
    u = pair.u
    col = np.sqrt(np.sum(u ** 2, axis=1))
    r_abs = pair.residual * float(np.linalg.norm(u[pair.grid.mask]))
    return 2 * pair.spacing * float(col.max()) * r_abs


def verify_carleman_decay(
    hprof: HProfile,
    profile: MuProfile,
    lam: float,
    L1: float,
    L2: float,
    x_star: float,
    residual_tol: float = 0.0,
    elongated: bool = True,
    decay_C: float = 1.0,
):
    """Pointwise ``H'' >= 2 (mu - lambda) H`` and an exponential fit of ``H`` away from ``x*``."""
    x = hprof.x
    H = hprof.H
    dx = profile.spacing
    if len(x) != len(profile.x) or not np.allclose(x, profile.x):
        raise ValueError("H and mu must share the x-grid")
    A = float(H.max())
    usable = profile.usable
    inner = np.zeros(len(x), dtype=bool)
    inner[1:-1] = usable[1:-1] & (H[1:-1] > 1e-12 * A)
    idx = np.nonzero(inner)[0]
    d2 = (H[idx + 1] - 2 * H[idx] + H[idx - 1]) / dx ** 2
    rhs = 2 * (profile.mu[idx] - lam) * H[idx]
    tol = carleman_tolerance(H[idx], profile.mu[idx] - lam, dx) + residual_tol
    ok = d2 >= rhs - tol
    frac = float(ok.mean()) if len(ok) else 1.0
    worst = float(np.max((rhs - d2) / max(A, 1e-300) * L2 ** 2)) if len(ok) else 0.0
    pointwise = CheckResult(
        "carleman_inequality",
        "H''(x) >= 2 (mu(x) - lambda) H(x) for the column mass H",
        {"fraction_holding": frac, "tested_nodes": int(len(ok)), "max_violation*L2^2/A": worst},
        {"min_fraction": 0.99, "tol_H": tol},
        bool(frac >= 0.99),
    )
    name, anchor = "carleman_decay", "H decays like exp(-c |x - x*| / L2) away from x*"
    if not elongated:
        decay = CheckResult.skip(name, anchor, "scales comparable; no longitudinal tail to fit")
        return [pointwise, decay]
    carrying = np.nonzero(profile.counts > 0)[0]
    lo_end, hi_end = x[carrying[0]], x[carrying[-1]]
    far = (np.abs(x - x_star) >= decay_C * L2) & (H > 1e-12 * A)
    far &= (x - lo_end >= 2 * L1) & (hi_end - x >= 2 * L1)
    if far.sum() < 5:
        decay = CheckResult.skip(name, anchor, f"only {int(far.sum())} nodes beyond C L2 from x*")
        return [pointwise, decay]
    slope, _ = np.polyfit(np.abs(x[far] - x_star), np.log(H[far]), 1)
    r = -float(slope)
    decay = CheckResult(
        name,
        anchor,
        {"rate*L2": r * L2, "fit_nodes": int(far.sum())},
        {"min_rate*L2": 0.1, "max_rate*L2": 10.0},
        bool(0.1 <= r * L2 <= 10.0),
    )
    return [pointwise, decay]


# --- integrals -------------------------------------------------------------------


def verify_mass_bounds(pair: EigenPair2D, hprof: HProfile, L1: float, L2: float, x_star: float, tol: Tolerances = Tolerances()):
    grid = pair.grid
    h = grid.spacing
    u = pair.u
    ux, uy = gradient(u, grid.mask, h)
    xs = grid.lattice.xs
    window = (np.abs(xs - x_star) <= 3 * tol.decay_C * L2)[:, None]
    total = h * h * float(np.sum(u ** 2))
    win_mass = h * h * float(np.sum((u ** 2) * window))
    win_ux = h * h * float(np.sum((ux ** 2) * window))
    win_grad = h * h * float(np.sum((ux ** 2 + uy ** 2) * window))
    A = hprof.A_max
    out = [
        CheckResult(
            "mass_total",
            "the total mass of u^2 is at most C L1 L2",
            {"int u^2/(L1 L2)": total / (L1 * L2)},
            {"max": tol.ratio_ceiling},
            total / (L1 * L2) <= tol.ratio_ceiling,
        ),
        CheckResult(
            "mass_column_max",
            "the largest column mass A is comparable to L1",
            {"A/L1": A / L1},
            {"min": tol.mass_floor, "max": tol.mass_ceiling},
            tol.mass_floor <= A / L1 <= tol.mass_ceiling,
        ),
        CheckResult(
            "mass_window",
            "the mass of u^2 in a window of width ~L2 around x* is at most C L1 L2",
            {"int_W u^2/(L1 L2)": win_mass / (L1 * L2)},
            {"max": tol.ratio_ceiling},
            win_mass / (L1 * L2) <= tol.ratio_ceiling,
            notes="sharp window |x - x*| <= 3 C L2",
        ),
        CheckResult(
            "grad_x_window",
            "the x-derivative energy in the window is at most C L1 / L2",
            {"int_W (u_x)^2 L2/L1": win_ux * L2 / L1},
            {"max": tol.ratio_ceiling},
            win_ux * L2 / L1 <= tol.ratio_ceiling,
            notes="sharp window |x - x*| <= 3 C L2",
        ),
        CheckResult(
            "grad_window",
            "the full gradient energy in the window is at most C L2 / L1",
            {"int_W |grad u|^2 L1/L2": win_grad * L1 / L2},
            {"max": tol.ratio_ceiling},
            win_grad * L1 / L2 <= tol.ratio_ceiling,
            notes="sharp window |x - x*| <= 3 C L2",
        ),
    ]
    return out


# --- level sets -------------------------------------------------------------------


def distance_to_region(grid: Grid2D, region: np.ndarray, points: np.ndarray) -> float:
    """Smallest distance from ``points`` to the lattice nodes of ``region``."""
    if not region.any() or len(points) == 0:
        return float("inf")
    lat = grid.lattice
    dist, inds = ndimage.distance_transform_edt(~region, return_indices=True)
    fi = np.clip(np.round((points[:, 0] - lat.x0) / lat.spacing).astype(int), 0, lat.nx - 1)
    fj = np.clip(np.round((points[:, 1] - lat.y0) / lat.spacing).astype(int), 0, lat.ny - 1)
    tx = lat.x0 + lat.spacing * inds[0][fi, fj]
    ty = lat.y0 + lat.spacing * inds[1][fi, fj]
    return float(np.min(np.hypot(points[:, 0] - tx, points[:, 1] - ty)))


def verify_level_shape(pair: EigenPair2D, potential, L1: float, L2: float, levels=(0.25, 0.5, 0.75), tol: Tolerances = Tolerances()):
    """Extents, inradius, diameter and John axes of ``{u >= c}`` against ``L1`` (across) and ``L2`` (along)."""
    K = tol.K_shape
    grid = pair.grid
    X, Y = grid.lattice.mesh()
    steep = grid.mask & (grid.V >= 1 + tol.agmon_C * L1 ** -2)
    checks, reports, ecc = [], {}, {}
    for c in levels:
        name = f"level_shape_{c:g}"
        anchor = "superlevel sets are ellipse-like with axes ~L1 across and ~L2 along"
        if not tol.level_margin <= c <= 1 - tol.level_margin:
            checks.append(CheckResult.skip(name, anchor, f"level {c} outside the admissible band"))
            continue
        rep = level_set(pair, c)
        reports[c] = rep
        ratios = {
            "y_extent/L1": rep.y_extent / L1,
            "x_extent/L2": rep.x_extent / L2,
            "inradius/L1": rep.inradius / L1,
            "diameter/L2": rep.diameter / L2,
        }
        if rep.ellipse is not None:
            ratios["john_minor/L1"] = 2 * rep.ellipse.q / L1
            ratios["john_major/L2"] = 2 * rep.ellipse.p / L2
        in_band = all(1 / K <= v <= K for v in ratios.values())
        hull_ok = rep.hull_ratio >= rep.hull_threshold
        pts = np.vstack(rep.contours) if rep.contours else np.empty((0, 2))
        gap = distance_to_region(grid, steep, pts)
        measured = dict(ratios)
        measured["hull_area_ratio"] = rep.hull_ratio
        measured["dist_to_steep_set/L1"] = gap / L1 if math.isfinite(gap) else None
        measured["john_kappa"] = rep.ellipse.kappa if rep.ellipse is not None else None
        checks.append(
            CheckResult(
                name,
                anchor,
                measured,
                {"band": [1 / K, K], "hull_area_min": rep.hull_threshold},
                bool(in_band and hull_ok),
            )
        )
        ecc[c] = rep.eccentricity
    return checks, reports, {"eccentricity": {f"{c:g}": v for c, v in ecc.items()}, "L2/L1": L2 / L1}


# --- maximum and gradients ----------------------------------------------------------


def _boundary_nodes(mask: np.ndarray) -> np.ndarray:
    return mask & ~ndimage.binary_erosion(mask, border_value=0)


def verify_max_and_gradients(pair: EigenPair2D, potential, L1: float, L2: float, tol: Tolerances = Tolerances()):
    grid = pair.grid
    u = pair.u
    h = grid.spacing
    i, j = np.unravel_index(np.argmax(u), u.shape)
    xs, ys = grid.lattice.xs, grid.lattice.ys
    xu, yu = xs[i], ys[j]
    c_star = -(grid.V[i, j] - pair.lam) * L1 ** 2
    ux, uy = gradient(u, grid.mask, h)
    gnorm = np.hypot(ux, uy)
    out = [
        CheckResult(
            "max_location",
            "the potential at the maximum of u lies below lambda by c L1^-2",
            {"c_star": c_star, "x_max": float(xu), "y_max": float(yu)},
            {"min": tol.c_star_floor},
            bool(c_star >= tol.c_star_floor),
        )
    ]
    bulk = grid.mask & (u >= 0.25)
    g_bulk = float(gnorm[bulk].max()) * L1
    out.append(
        CheckResult(
            "gradient_bulk",
            "|grad u| <= C / L1 on {u >= 1/4}",
            {"max |grad u| L1": g_bulk},
            {"max": tol.gradient_ceiling},
            g_bulk <= tol.gradient_ceiling,
        )
    )
    for eps in (0.04, 0.16):
        name = f"eps_superlevel_{eps:g}"
        anchor = "{u >= 1 - eps} has inradius ~ eps^(1/2) L1 and boundary gradient ~ eps^(1/2)/L1"
        m = grid.mask & (u >= 1 - eps)
        try:
            rep = level_set(pair, 1 - eps)
        except LevelEmpty:
            rep = None
        if rep is None or m.sum() < 5 or rep.inradius < 2 * h:
            out.append(CheckResult.skip(name, anchor, "superlevel set below grid resolution", nodes=int(m.sum())))
            continue
        r = rep.inradius / (math.sqrt(eps) * L1)
        edge = _boundary_nodes(m)
        gb = float(gnorm[edge].max()) * L1 / math.sqrt(eps)
        passed = tol.eps_floor <= r <= tol.eps_ceiling and gb <= tol.gradient_ceiling
        out.append(
            CheckResult(
                name,
                anchor,
                {"inradius/(eps^(1/2) L1)": r, "max boundary |grad u| L1/eps^(1/2)": gb},
                {"inradius_band": [tol.eps_floor, tol.eps_ceiling], "gradient_max": tol.gradient_ceiling},
                bool(passed),
            )
        )
    X, Y = grid.lattice.mesh()
    box = grid.mask & (np.abs(X - xu) <= 0.2 * L2) & (np.abs(Y - yu) <= 0.2 * L1)
    gx = float(np.abs(ux[box]).max()) * L2 if box.any() else 0.0
    out.append(
        CheckResult(
            "dx_central",
            "|u_x| <= C / L2 on the central rectangle around the maximum",
            {"max |u_x| L2": gx, "nodes": int(box.sum())},
            {"max": tol.gradient_ceiling},
            gx <= tol.gradient_ceiling,
        )
    )
    return out


# --- log-concavity ------------------------------------------------------------------


def verify_log_concavity(report) -> CheckResult:
    return CheckResult(
        "log_concavity",
        "log u is concave, so every superlevel set is convex",
        {
            "max_second_difference": report.max_second_difference,
            "violations": report.violations,
            "hull_area_ratios": {f"{k:g}": v[0] for k, v in report.hull_ratios.items()},
        },
        {
            "tol_lc": report.tolerance,
            "hull_area_min": {f"{k:g}": v[1] for k, v in report.hull_ratios.items()},
        },
        report.passed,
    )


# --- Agmon distance -----------------------------------------------------------------


@dataclass
class AgmonField:
    region: np.ndarray  # Omega_1 nodes
    sources: np.ndarray
    nu: np.ndarray  # V - lambda on the region, nan elsewhere
    hstar: np.ndarray  # inf off the region or where unreachable

    @property
    def empty(self) -> bool:
        return not self.region.any()


NEIGHBOURS = ((1, 0), (0, 1), (1, 1), (1, -1))


def edge_weight(root_mean, length, kind: str = "lattice"):
    """Agmon weight of a lattice edge from the mean of ``sqrt(nu)`` at its ends.

    ``"continuum"`` is ``(1/2) sqrt(nu) * length``. ``"lattice"`` is
    ``asinh(sqrt(nu) * length / 2)``, half the exact per-step decay rate of
    the three-point equation at constant ``nu``; the two agree to third order
    when ``sqrt(nu) * length`` is small, and the lattice form stays consistent
    with the discrete eigenfunction where ``V`` is huge on the grid scale.
    """
    x = root_mean * length
    if kind == "continuum":
        return 0.5 * x
    if kind == "lattice":
        return np.arcsinh(0.5 * x)
    raise ValueError(f"unknown Agmon weight {kind!r}")


def agmon_field_from_arrays(nu: np.ndarray, region: np.ndarray, sources: np.ndarray, spacing: float, weight: str = "lattice") -> np.ndarray:
    """Dijkstra on the 8-connected lattice restricted to ``region``; ``inf`` where unreachable."""
    idx = np.full(region.shape, -1, dtype=np.int64)
    n = int(region.sum())
    idx[region] = np.arange(n)
    root = np.sqrt(np.where(region, np.maximum(nu, 0.0), 0.0))
    rows, cols, w = [], [], []
    nx, ny = region.shape
    for di, dj in NEIGHBOURS:
        # node (i, j) in the first slice pairs with (i + di, j + dj) in the second
        sa = (slice(0, nx - di), slice(max(0, -dj), ny - max(0, dj)))
        sb = (slice(di, nx), slice(max(0, dj), ny - max(0, -dj)))
        both = region[sa] & region[sb]
        rows.append(idx[sa][both])
        cols.append(idx[sb][both])
        mean_root = 0.5 * (root[sa][both] + root[sb][both])
        w.append(edge_weight(mean_root, spacing * math.hypot(di, dj), weight))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    # zero-weight edges would vanish from a sparse graph; keep them tiny instead
    w = np.maximum(np.concatenate(w), 1e-300)
    graph = sp.coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    hstar = np.full(region.shape, np.inf)
    src = idx[sources & region]
    if len(src) == 0:
        return hstar
    hstar[region] = dijkstra(graph, directed=False, indices=src, min_only=True)
    return hstar


def agmon_distance(potential, lam: float, L1: float, grid: Grid2D, C: float = 16.0, weight: str = "lattice") -> AgmonField:
    """Agmon distance on ``{V >= 1 + C L1**-2}`` from its nodes next to the rest of the domain."""
    region = grid.mask & (grid.V >= 1 + C * L1 ** -2)
    inner = grid.mask & ~region
    near_inner = ndimage.binary_dilation(inner, structure=np.ones((3, 3), bool))
    sources = region & near_inner
    nu = np.where(region, grid.V - lam, np.nan)
    hstar = agmon_field_from_arrays(np.nan_to_num(nu), region, sources, grid.spacing, weight)
    return AgmonField(region, sources, nu, hstar)


def verify_agmon(pair: EigenPair2D, field: AgmonField, L1: float, L2: float, C_agmon: float = 100.0, u_floor: float = 1e-8) -> CheckResult:
    """``int_{Omega_1} u^2 exp(2 h*) / (L1 L2)`` over the nodes where u is resolved.

    Values of u far below the solver's residual are noise, and ``exp(2 h*)``
    would amplify that noise without bound; nodes with ``u <= u_floor`` are
    left out and counted in the notes.
    """
    name, anchor = "agmon", "the Agmon-weighted mass of u^2 on the forbidden region is at most C L1 L2"
    if field.empty:
        return CheckResult.skip(name, anchor, "forbidden region is empty at this scale")
    if not field.sources.any():
        return CheckResult.skip(name, anchor, "forbidden region has no inner boundary")
    h = pair.grid.spacing
    reach = field.region & np.isfinite(field.hstar)
    used = reach & (pair.u > u_floor)
    expo = 2 * field.hstar[used] + 2 * np.log(pair.u[used])
    with np.errstate(over="ignore"):
        weighted = h * h * float(np.sum(np.exp(expo)))
    plain = h * h * float(np.sum(pair.u[used] ** 2))
    ratio = weighted / (L1 * L2)
    notes = []
    unreachable = int((field.region & ~reach).sum())
    if unreachable:
        notes.append(f"{unreachable} unreachable nodes")
    below = int((reach & ~used).sum())
    if below:
        notes.append(f"{below} nodes with u <= {u_floor:g} left out")
    nu_min = float(np.nanmin(field.nu[field.region]) * L1 ** 2)
    return CheckResult(
        name,
        anchor,
        {"weighted/(L1 L2)": ratio, "unweighted/(L1 L2)": plain / (L1 * L2), "min nu* L1^2": nu_min},
        {"max": C_agmon, "u_floor": u_floor},
        bool(ratio <= C_agmon),
        notes="; ".join(notes),
    )


# --- cross-sectional eigenfunction ---------------------------------------------------


def verify_dpsi(domain, potential, L2: float, I, lattice, samples: int = 5, C_psi: float = 50.0) -> CheckResult:
    name, anchor = "dpsi", "int (d psi/dx)^2 dy <= C L2^-2 uniformly in x"
    dx = lattice.spacing
    lo, hi = I
    if hi - lo < 4 * dx:
        return CheckResult.skip(name, anchor, "interval I shorter than four grid steps")
    mid, half = 0.5 * (lo + hi), 0.25 * (hi - lo)
    xs = np.linspace(mid - half, mid + half, samples)
    xs = lattice.x0 + dx * np.round((xs - lattice.x0) / dx)
    values, orth, missed = [], [], []
    for x in xs:
        try:
            s = dpsi_dx_l2(domain, potential, float(x), dx, dx, lattice.y0)
        except (AtDomainEdge, CrossSectionTooThin):
            missed.append(float(x))
            continue
        values.append(s.value)
        orth.append(s.orthogonality)
    if not values:
        return CheckResult.skip(name, anchor, "every sample sits at the domain edge")
    m = max(values) * L2 ** 2
    return CheckResult(
        name,
        anchor,
        {"max dpsi L2^2": m, "samples": len(values), "max |orthogonality| L2": max(abs(o) for o in orth) * L2},
        {"max": C_psi},
        bool(m <= C_psi),
        notes=f"samples at the domain edge skipped: {missed}" if missed else "",
    )
