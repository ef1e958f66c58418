"""The transverse scale ``L1``, the orientation, and the longitudinal scale ``L2``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .checks import CheckResult
from .errors import EmptyDomain, EmptyRegion, ResolutionTooCoarse
from .geometry import ConvexDomain, Lattice, diameter, inradius, min_width_direction, sublevel_region
from .sturm1d import MuProfile

C_TILDE = 8.0
L1_RTOL = 1e-3


@dataclass
class L1Result:
    L1: float
    L1_tilde: float
    region: object  # ConvexDomain or RegionMask of {V <= 1 + L1**-2}
    evaluations: list = field(default_factory=list)


def _sublevel(potential, L: float, lattice: Lattice | None, exact: bool):
    c = L ** -2
    if exact:
        return potential.sublevel_polygon(c)
    mask = sublevel_region(potential, c, lattice)
    return mask if mask.count else None


def _check_monotone(evals):
    """The predicate must switch from true to false exactly once along increasing L."""
    ordered = sorted(evals)
    seen_false = False
    for L, ok in ordered:
        if not ok:
            seen_false = True
        elif seen_false:
            raise RuntimeError(f"inradius predicate is not monotone near L = {L:.6g}")


def compute_L1(domain: ConvexDomain, potential, grid: Lattice | None = None, rtol: float = L1_RTOL, lower: float | None = None) -> L1Result:
    """Largest ``L`` whose sublevel set ``{V <= 1 + L**-2}`` has inradius at least ``L``.

    Uses the exact superlevel polygon of the height when available, else the
    node mask on ``grid``. Bisection runs in log scale between ``lower`` (the
    grid spacing by default) and the diameter; the lower end is returned.
    """
    try:
        potential.sublevel_polygon(1.0)
        exact = True
    except NotImplementedError:
        exact = False
        if grid is None:
            raise ResolutionTooCoarse("a lattice is needed for heights without exact superlevel sets")
    if lower is None:
        lower = grid.spacing if grid is not None else min(1.0, inradius(domain)) / 16
    hi = diameter(domain)
    evals = []

    def predicate(L):
        region = _sublevel(potential, L, grid, exact)
        try:
            ok = region is not None and inradius(region) >= L
        except EmptyRegion:  # sliver too thin for the linear program
            ok = False
        evals.append((L, ok))
        return ok

    if not predicate(lower):
        raise ResolutionTooCoarse(f"the sublevel set is thinner than the resolution {lower:.4g}")
    lo = lower
    if predicate(hi):
        lo = hi
    else:
        while hi / lo - 1 > rtol:
            mid = math.sqrt(lo * hi)
            if predicate(mid):
                lo = mid
            else:
                hi = mid
    _check_monotone(evals)
    region = _sublevel(potential, lo, grid, exact)
    return L1Result(lo, diameter(region), region, evals)


def orient_domain(domain: ConvexDomain, potential, L1: float, region=None):
    """Rotate so the sublevel set at ``L1`` is thinnest along y; returns ``(domain, potential, theta)``."""
    if region is None:
        region = potential.sublevel_polygon(L1 ** -2)
    if region is None:
        raise EmptyDomain("sublevel set at L1 is empty")
    theta, _ = min_width_direction(region)
    if theta == 0:
        return domain, potential, 0.0
    rotated = potential.rotated(theta, domain.centroid)
    return rotated.domain, rotated, theta


def _runs(flags: np.ndarray):
    """Start and stop (exclusive) indices of the runs of True."""
    f = np.concatenate([[False], flags, [False]]).astype(np.int8)
    d = np.diff(f)
    return np.nonzero(d == 1)[0], np.nonzero(d == -1)[0]


def max_run(flags: np.ndarray) -> int:
    starts, stops = _runs(flags)
    return int((stops - starts).max()) if len(starts) else 0


def window_scale_bruteforce(profile: MuProfile) -> float:
    """``max`` over windows of ``min(length, (max mu - mu*)**-1/2)`` by exhaustive scan."""
    usable = profile.usable
    gap = profile.mu - profile.mu_star
    n = len(gap)
    best = 0.0
    for i in range(n):
        if not usable[i]:
            continue
        m = 0.0
        for j in range(i, n):
            if not usable[j]:
                break
            m = max(m, gap[j])
            length = (j - i + 1) * profile.spacing
            best = max(best, length if m <= 0 else min(length, m ** -0.5))
    return best


def compute_L2(profile: MuProfile, L1: float, L1_tilde: float, C_tilde: float = C_TILDE):
    """``(L2, I, comparable)``.

    When ``L1_tilde <= C_tilde * L1`` the scales are comparable and
    ``L2 = L1`` with ``I`` centred at ``x*`` as far as the usable columns
    allow. Otherwise ``L2`` is the largest
    ``L`` admitting a window of ``L / dx`` consecutive columns with
    ``mu <= mu* + L**-2``; the threshold is bisected over the sorted gaps
    ``mu - mu*`` so the answer equals the exhaustive window scan. ``I`` is the
    leftmost run of columns that realises it.
    """
    dx = profile.spacing
    x_star = profile.x_star
    if L1_tilde <= C_tilde * L1:
        # centred at x*, shifted back inside the usable columns when it sticks out
        xs = profile.x[profile.usable]
        lo_end, hi_end = xs[0] - dx / 2, xs[-1] + dx / 2
        lo = min(max(x_star - L1 / 2, lo_end), max(hi_end - L1, lo_end))
        return L1, (float(lo), float(min(lo + L1, hi_end))), True
    usable = profile.usable
    gap = np.where(usable, profile.mu - profile.mu_star, np.inf)
    thresholds = np.unique(gap[usable])

    def run_length(t):
        return max_run(gap <= t) * dx

    def value(k):
        t = thresholds[k]
        r = run_length(t)
        return r if t <= 0 else min(r, t ** -0.5)

    def crossed(k):
        t = thresholds[k]
        return t > 0 and run_length(t) >= t ** -0.5

    # the first threshold where the run length reaches t**-1/2; crossed() is monotone in k
    lo, hi = 0, len(thresholds) - 1
    if not crossed(hi):
        lo = hi
    while lo < hi:
        mid = (lo + hi) // 2
        if crossed(mid):
            hi = mid
        else:
            lo = mid + 1
    k = lo
    candidates = [value(j) for j in (k - 1, k) if 0 <= j < len(thresholds)]
    L2 = max(candidates)
    t2 = L2 ** -2
    flags = gap <= t2 * (1 + 1e-12)
    starts, stops = _runs(flags)
    need = L2 / dx * (1 - 1e-12)
    for s, e in zip(starts, stops):
        if e - s >= need:
            I = (float(profile.x[s] - dx / 2), float(profile.x[e - 1] + dx / 2))
            break
    else:  # pragma: no cover - guarded by construction
        raise RuntimeError("no window realises L2")
    return float(L2), I, False


@dataclass
class ScaleReport:
    L1: float
    L1_tilde: float
    theta: float
    L2: float
    I: tuple
    comparable: bool
    C_tilde: float
    N1: float
    N2: float
    mu_star: float
    x_star: float
    bound_checks: list = field(default_factory=list)

    def to_dict(self):
        return {
            "L1": self.L1,
            "L1_tilde": self.L1_tilde,
            "theta": self.theta,
            "L2": self.L2,
            "I": list(self.I),
            "comparable": self.comparable,
            "C_tilde": self.C_tilde,
            "N1": self.N1,
            "N2": self.N2,
            "mu_star": self.mu_star,
            "x_star": self.x_star,
            "bound_checks": [c.to_dict() for c in self.bound_checks],
        }


def check_scale_bounds(report: ScaleReport, N1: float, tol: float = 1e-3, K: float = 4.0, floor: float = 0.05):
    """Upper and lower comparisons of ``L1`` with the inradius and ``L2`` with the sublevel diameter."""
    L1, L2, Lt = report.L1, report.L2, report.L1_tilde
    r_upper = L1 / N1
    r_lower = L1 / N1 ** 0.2
    r_l2_low = L2 / (Lt ** (1 / 3) * L1 ** (2 / 3))
    r_l2_up = L2 / Lt
    return [
        CheckResult(
            "L1_upper",
            "L1 never exceeds the inradius of the domain",
            {"L1/N1": r_upper},
            {"max": 1 + tol},
            r_upper <= 1 + tol,
        ),
        CheckResult(
            "L1_lower",
            "L1 is at least a constant times the fifth root of the inradius",
            {"L1/N1^(1/5)": r_lower},
            {"min": floor},
            r_lower >= floor,
        ),
        CheckResult(
            "L2_lower",
            "L2 is at least a constant times L1_tilde^(1/3) L1^(2/3)",
            {"L2/(L1_tilde^(1/3) L1^(2/3))": r_l2_low},
            {"min": floor},
            r_l2_low >= floor,
        ),
        CheckResult(
            "L2_upper",
            "L2 is at most a constant times the diameter of the sublevel set",
            {"L2/L1_tilde": r_l2_up},
            {"max": K},
            r_l2_up <= K,
        ),
    ]
