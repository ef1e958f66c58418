"""Concave height functions ``h`` and the potential ``V = h**-2``.

Every height knows how to evaluate itself, how to produce its exact
superlevel set ``{h >= k}`` inside a polygon, and how to rotate rigidly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DegenerateHeight, InvalidDomain, OutsideDomain
from .geometry import (
    ConvexDomain,
    Lattice,
    clip_halfplane,
    rotate_points,
    rotation_matrix,
)

V_MAX = 1e8
H_FLOOR = 1e-4
DISC_VERTICES = 720


class HeightFunction:
    """Base class; subclasses implement ``_raw`` (values before clamping to [0, 1])."""

    concave = True

    def _raw(self, x, y):
        raise NotImplementedError

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.clip(self._raw(x, y), 0.0, 1.0)

    def superlevel_polygon(self, domain: ConvexDomain, k: float):
        raise NotImplementedError

    def rotated(self, angle: float, center) -> "HeightFunction":
        return RotatedHeight(self, angle, np.asarray(center, dtype=float))

    def peak(self, domain: ConvexDomain):
        return None

    def to_spec(self) -> dict:
        raise NotImplementedError


@dataclass
class MinAffineHeight(HeightFunction):
    """``h = clamp(min_i (a_i x + b_i y + c_i), 0, 1)``."""

    pieces: np.ndarray

    def __post_init__(self):
        self.pieces = np.atleast_2d(np.asarray(self.pieces, dtype=float))
        if self.pieces.size == 0 or self.pieces.shape[1] != 3:
            raise DegenerateHeight("need at least one (a, b, c) piece")
        if not np.all(np.isfinite(self.pieces)):
            raise DegenerateHeight("non-finite affine coefficients")

    def _raw(self, x, y):
        p = self.pieces
        out = p[0, 0] * x + p[0, 1] * y + p[0, 2]
        for a, b, c in p[1:]:
            out = np.minimum(out, a * x + b * y + c)
        return out

    def superlevel_polygon(self, domain, k):
        if k > 1:
            return None
        poly = domain
        for a, b, c in self.pieces:
            if a == 0 and b == 0:
                if c < k:
                    return None
                continue
            poly = clip_halfplane(poly, (-a, -b), c - k)
            if poly is None:
                return None
        return poly

    def max_over(self, domain: ConvexDomain):
        """Point and value of ``max min_i l_i`` over the polygon (linear program)."""
        n, d = domain.halfplanes()
        p = self.pieces
        a_ub = np.vstack(
            [
                np.column_stack([-p[:, 0], -p[:, 1], np.ones(len(p))]),
                np.column_stack([n, np.zeros(len(n))]),
            ]
        )
        b_ub = np.concatenate([p[:, 2], d])
        res = optimize.linprog(
            c=[0.0, 0.0, -1.0], A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * 3, method="highs"
        )
        if res.status != 0:
            raise DegenerateHeight(f"cannot maximise height over the domain: {res.message}")
        return res.x[:2], float(res.x[2])

    def peak(self, domain):
        return self.max_over(domain)[0]

    def rotated(self, angle, center):
        center = np.asarray(center, dtype=float)
        r = rotation_matrix(angle)
        w = self.pieces[:, :2]
        w_new = w @ r.T
        c_new = self.pieces[:, 2] + w @ center - w_new @ center
        return MinAffineHeight(np.column_stack([w_new, c_new]))

    def to_spec(self):
        return {"type": "min_affine", "pieces": self.pieces.tolist()}


@dataclass
class ConeHeight(HeightFunction):
    """``h = 1 - slope * |p - peak|``."""

    peak_point: np.ndarray
    slope: float

    def __post_init__(self):
        self.peak_point = np.asarray(self.peak_point, dtype=float)
        if not self.slope > 0:
            raise DegenerateHeight("cone slope must be positive")

    def _raw(self, x, y):
        return 1.0 - self.slope * np.hypot(x - self.peak_point[0], y - self.peak_point[1])

    def superlevel_polygon(self, domain, k):
        if k > 1:
            return None
        r = (1.0 - k) / self.slope
        if r <= 0:
            return None
        t = 2 * np.pi * np.arange(DISC_VERTICES) / DISC_VERTICES
        poly = ConvexDomain(
            self.peak_point + r * np.column_stack([np.cos(t), np.sin(t)]), validate=False
        )
        n, d = domain.halfplanes()
        for nk, dk in zip(n, d):
            poly = clip_halfplane(poly, nk, dk)
            if poly is None:
                return None
        return poly

    def peak(self, domain):
        return self.peak_point

    def rotated(self, angle, center):
        return ConeHeight(rotate_points(self.peak_point[None, :], angle, center)[0], self.slope)

    def to_spec(self):
        return {"type": "cone", "peak": self.peak_point.tolist(), "slope": self.slope}


@dataclass
class TentHeight(HeightFunction):
    """Linear-in-x ridge over a (tapered) right triangle.

    On ``0 <= x <= n2``, ``0 <= y <= 2 y_J(x)`` with ``y_J = (n1/2)(1 - (1-taper) x/n2)``
    the height is ``(x/n2)(1 - |y - y_J|/y_J)``: one at ``(n2, 0)`` when
    ``taper == 0`` and zero at the midpoint of the side ``x = 0``. This is
    not concave in general; ``validate_height`` exposes that.
    """

    n1: float
    n2: float
    taper: float = 0.0
    concave = False

    def _ridge(self, x):
        return 0.5 * self.n1 * (1.0 - (1.0 - self.taper) * x / self.n2)

    def _raw(self, x, y):
        yj = self._ridge(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(yj > 0, 1.0 - np.abs(y - yj) / np.where(yj > 0, yj, 1.0), 0.0)
        frac = np.where((yj <= 0) & (np.abs(y - yj) == 0), 1.0, frac)
        return (x / self.n2) * frac

    def superlevel_polygon(self, domain, k, samples: int = 512):
        if k > 1 or k <= 0:
            return None if k > 1 else domain
        x_lo = k * self.n2
        if x_lo >= self.n2:
            return None
        xs = np.linspace(x_lo, self.n2, samples)
        yj = self._ridge(xs)
        half = np.maximum(yj * (1.0 - x_lo / xs), 0.0)
        lower = np.column_stack([xs, yj - half])
        upper = np.column_stack([xs, yj + half])[::-1]
        pts = np.vstack([lower, upper])
        try:
            poly = ConvexDomain(pts, validate=False)
        except InvalidDomain:
            return None
        if poly.area <= 0:
            return None
        n, d = domain.halfplanes()
        for nk, dk in zip(n, d):
            poly = clip_halfplane(poly, nk, dk)
            if poly is None:
                return None
        return poly

    def peak(self, domain):
        return np.array([self.n2, self._ridge(self.n2)])

    def to_spec(self):
        return {"type": "tent", "n1": self.n1, "n2": self.n2, "taper": self.taper}


@dataclass
class RotatedHeight(HeightFunction):
    """``base`` composed with a rigid rotation by ``angle`` about ``center``."""

    base: HeightFunction
    angle: float
    center: np.ndarray

    def __post_init__(self):
        self.concave = self.base.concave

    def _raw(self, x, y):
        shape = np.broadcast(x, y).shape
        pts = np.column_stack([np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()])
        back = rotate_points(pts, -self.angle, self.center)
        return self.base._raw(back[:, 0], back[:, 1]).reshape(shape)

    def superlevel_polygon(self, domain, k):
        pre = ConvexDomain(rotate_points(domain.vertices, -self.angle, self.center), validate=False)
        poly = self.base.superlevel_polygon(pre, k)
        if poly is None:
            return None
        return ConvexDomain(rotate_points(poly.vertices, self.angle, self.center), validate=False)

    def peak(self, domain):
        pre = ConvexDomain(rotate_points(domain.vertices, -self.angle, self.center), validate=False)
        p = self.base.peak(pre)
        return None if p is None else rotate_points(np.atleast_2d(p), self.angle, self.center)[0]

    def rotated(self, angle, center):
        return RotatedHeight(self, angle, np.asarray(center, dtype=float))

    def to_spec(self):
        return {
            "type": "rotated",
            "angle": self.angle,
            "center": self.center.tolist(),
            "base": self.base.to_spec(),
        }


# --- named constructors ------------------------------------------------------


def make_min_affine(pieces, domain: ConvexDomain) -> MinAffineHeight:
    """Min-of-affine height shifted additively so that its maximum over the domain is 1."""
    h = MinAffineHeight(pieces)
    _, top = h.max_over(domain)
    if not np.isfinite(top):
        raise DegenerateHeight("maximum of the pieces is not finite")
    if top < 1.0:
        p = h.pieces.copy()
        p[:, 2] += 1.0 - top
        h = MinAffineHeight(p)
        if h.max_over(domain)[1] < 1.0 - 1e-9:
            raise DegenerateHeight("could not renormalise the height to reach 1")
    return h


def constant() -> MinAffineHeight:
    return MinAffineHeight([[0.0, 0.0, 1.0]])


def cone(peak, slope: float) -> ConeHeight:
    return ConeHeight(np.asarray(peak, dtype=float), float(slope))


def triangle_domain(n1: float, n2: float) -> ConvexDomain:
    return ConvexDomain([[0.0, 0.0], [n2, 0.0], [0.0, n1]])


def trapezoid_domain(n1: float, n2: float, taper: float) -> ConvexDomain:
    if taper <= 0:
        return triangle_domain(n1, n2)
    return ConvexDomain([[0.0, 0.0], [n2, 0.0], [n2, taper * n1], [0.0, n1]])


def triangle_example(n1: float, n2: float) -> TentHeight:
    """Ridge height on the right triangle with legs ``n1`` (along y) and ``n2`` (along x)."""
    return TentHeight(float(n1), float(n2), 0.0)


def triangle_affine(n1: float, n2: float) -> MinAffineHeight:
    """Concave comparison height ``x / n2`` on the same triangle."""
    return MinAffineHeight([[1.0 / n2, 0.0, 0.0]])


def height_from_spec(spec: dict, domain: ConvexDomain | None = None) -> HeightFunction:
    kind = spec.get("type")
    if kind == "constant":
        return constant()
    if kind == "cone":
        return cone(spec["peak"], spec["slope"])
    if kind == "min_affine":
        pieces = spec["pieces"]
        if domain is not None and spec.get("renormalize", True):
            return make_min_affine(pieces, domain)
        return MinAffineHeight(pieces)
    if kind == "triangle_example":
        return triangle_example(spec["n1"], spec["n2"])
    if kind == "tent":
        return TentHeight(float(spec["n1"]), float(spec["n2"]), float(spec.get("taper", 0.0)))
    if kind == "triangle_affine":
        return triangle_affine(spec["n1"], spec["n2"])
    if kind == "rotated":
        base = height_from_spec(spec["base"])
        return RotatedHeight(base, float(spec["angle"]), np.asarray(spec["center"], dtype=float))
    raise DegenerateHeight(f"unknown potential type {kind!r}")


# --- the potential -------------------------------------------------------------


@dataclass
class Potential:
    height: HeightFunction
    domain: ConvexDomain
    v_max: float = V_MAX
    h_floor: float = H_FLOOR

    def values(self, x, y):
        """``min(h**-2, v_max)`` without a membership test."""
        h = self.height(x, y)
        with np.errstate(divide="ignore"):
            v = np.where(h > 0, 1.0 / np.where(h > 0, h, 1.0) ** 2, self.v_max)
        return np.minimum(v, self.v_max)

    def rotated(self, angle: float, center=None) -> "Potential":
        if center is None:
            center = self.domain.centroid
        center = np.asarray(center, dtype=float)
        if angle == 0:
            return self
        dom = ConvexDomain(rotate_points(self.domain.vertices, angle, center))
        return Potential(self.height.rotated(angle, center), dom, self.v_max, self.h_floor)

    def sublevel_polygon(self, c: float):
        """Exact ``{V <= 1 + c}`` as a polygon (or ``None`` when empty)."""
        if c < 0:
            return None
        return self.height.superlevel_polygon(self.domain, (1.0 + c) ** -0.5)

    def to_spec(self):
        return {"height": self.height.to_spec(), "v_max": self.v_max, "h_floor": self.h_floor}


def eval_potential(potential: Potential, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dom = potential.domain
    if not np.all(dom.contains(x, y, tol=1e-12 * max(1.0, dom.scale))):
        raise OutsideDomain("point outside the domain")
    return potential.values(x, y)


@dataclass
class HeightReport:
    max_h: float
    min_h: float
    max_ok: bool
    range_ok: bool
    concavity_violations: int
    worst_violation: float
    pairs: int
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self):
        return {
            "max_h": self.max_h,
            "min_h": self.min_h,
            "max_ok": self.max_ok,
            "range_ok": self.range_ok,
            "concavity_violations": self.concavity_violations,
            "worst_violation": self.worst_violation,
            "pairs": self.pairs,
            "passed": self.passed,
            "failures": list(self.failures),
        }


def _sample_domain(domain: ConvexDomain, n: int, rng) -> np.ndarray:
    xmin, ymin, xmax, ymax = domain.bbox
    out = []
    got = 0
    while got < n:
        m = max(64, 2 * (n - got))
        pts = rng.uniform([xmin, ymin], [xmax, ymax], size=(m, 2))
        pts = pts[domain.contains(pts[:, 0], pts[:, 1])]
        out.append(pts)
        got += len(pts)
    return np.vstack(out)[:n]


def validate_height(height, domain: ConvexDomain, grid: Lattice | None = None, pairs: int = 10_000, seed: int = 0):
    """Check ``max h = 1``, ``0 <= h <= 1`` and midpoint concavity on random pairs."""
    if grid is None:
        xmin, ymin, xmax, ymax = domain.bbox
        spacing = max(xmax - xmin, ymax - ymin) / 200
        grid = Lattice.covering(domain, spacing, pad=0)
    X, Y = grid.mesh()
    inside = domain.contains(X, Y, tol=1e-12 * max(1.0, domain.scale))
    hv = np.asarray(height(X[inside], Y[inside]), dtype=float)
    peak = height.peak(domain) if hasattr(height, "peak") else None
    if peak is not None:
        hv = np.append(hv, float(np.asarray(height(peak[0], peak[1]))))
    failures = []
    max_h = float(hv.max()) if hv.size else float("nan")
    min_h = float(hv.min()) if hv.size else float("nan")
    max_ok = bool(abs(max_h - 1.0) <= 1e-6)
    range_ok = bool(min_h >= 0.0 and max_h <= 1.0)
    if not max_ok:
        failures.append(f"max h = {max_h:.9g}, expected 1")
    if not range_ok:
        failures.append(f"h leaves [0, 1]: [{min_h:.6g}, {max_h:.6g}]")
    rng = np.random.default_rng(seed)
    p = _sample_domain(domain, pairs, rng)
    q = _sample_domain(domain, pairs, rng)
    m = 0.5 * (p + q)
    gap = np.asarray(height(m[:, 0], m[:, 1])) - 0.5 * (
        np.asarray(height(p[:, 0], p[:, 1])) + np.asarray(height(q[:, 0], q[:, 1]))
    )
    bad = gap < -1e-9
    worst = float(-gap.min()) if gap.size else 0.0
    if bad.any():
        failures.append(f"midpoint concavity fails on {int(bad.sum())} of {pairs} pairs")
    return HeightReport(max_h, min_h, max_ok, range_ok, int(bad.sum()), max(worst, 0.0), pairs, failures)

