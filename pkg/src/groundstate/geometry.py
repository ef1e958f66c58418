"""Convex-set primitives on the plane.

Domains are convex polygons stored with counterclockwise vertices; they can
also be read as a pair of boundary graphs ``g1 <= y <= g2`` over ``[a, b]``.
Grid-based regions (``RegionMask``) live on a uniform ``Lattice``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize
from scipy.spatial import ConvexHull, QhullError

from .errors import EmptyRegion, GridMismatch, InvalidDomain

WIDTH_RESOLUTION = math.pi / 720


@dataclass(frozen=True)
class Lattice:
    """Uniform grid with equal spacing in x and y; arrays are indexed ``[ix, iy]``."""

    x0: float
    y0: float
    spacing: float
    nx: int
    ny: int

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.spacing * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.spacing * np.arange(self.ny)

    def mesh(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    @property
    def shape(self):
        return (self.nx, self.ny)

    @classmethod
    def covering(cls, domain: "ConvexDomain", spacing: float, pad: int = 1) -> "Lattice":
        """Smallest lattice with nodes on the domain's lower-left bbox corner (minus padding)."""
        xmin, ymin, xmax, ymax = domain.bbox
        x0 = xmin - pad * spacing
        y0 = ymin - pad * spacing
        nx = int(math.ceil((xmax - x0) / spacing - 1e-9)) + 1 + pad
        ny = int(math.ceil((ymax - y0) / spacing - 1e-9)) + 1 + pad
        return cls(x0, y0, spacing, nx, ny)

    def covers(self, domain: "ConvexDomain") -> bool:
        xmin, ymin, xmax, ymax = domain.bbox
        tol = 1e-9 * max(1.0, domain.scale)
        return (
            self.x0 <= xmin + tol
            and self.y0 <= ymin + tol
            and self.xs[-1] >= xmax - tol
            and self.ys[-1] >= ymax - tol
        )


@dataclass
class RegionMask:
    lattice: Lattice
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.lattice.shape:
            raise GridMismatch(f"mask shape {self.mask.shape} != lattice {self.lattice.shape}")

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def points(self) -> np.ndarray:
        ix, iy = np.nonzero(self.mask)
        lat = self.lattice
        return np.column_stack([lat.x0 + lat.spacing * ix, lat.y0 + lat.spacing * iy])

    @property
    def area(self) -> float:
        return self.count * self.lattice.spacing ** 2

    def hull_polygon(self, cells: bool = False) -> "ConvexDomain":
        """Convex hull of the member nodes (or of their grid cells) as a polygon."""
        pts = self.points()
        if len(pts) == 0:
            raise EmptyRegion("mask has no nodes")
        if cells:
            h = 0.5 * self.lattice.spacing
            offs = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
            pts = (pts[:, None, :] + offs[None, :, :]).reshape(-1, 2)
        return polygon_hull(pts)


@dataclass
class Ellipse:
    center: np.ndarray
    p: float  # semi-major
    q: float  # semi-minor
    angle: float  # direction of the major axis
    kappa: float = float("nan")  # dilation factor that covers the region

    @property
    def axes(self):
        e1 = np.array([math.cos(self.angle), math.sin(self.angle)])
        e2 = np.array([-e1[1], e1[0]])
        return e1, e2

    def boundary(self, n: int = 256) -> np.ndarray:
        t = 2 * np.pi * np.arange(n) / n
        e1, e2 = self.axes
        return (
            self.center[None, :]
            + self.p * np.cos(t)[:, None] * e1[None, :]
            + self.q * np.sin(t)[:, None] * e2[None, :]
        )

    def gauge(self, pts: np.ndarray) -> np.ndarray:
        """Ellipse norm of ``pts - center``; <= 1 inside the ellipse."""
        e1, e2 = self.axes
        d = np.atleast_2d(pts) - self.center
        return np.hypot(d @ e1 / self.p, d @ e2 / self.q)

    def to_dict(self):
        return {
            "center": [float(v) for v in self.center],
            "semi_axes": [float(self.p), float(self.q)],
            "angle": float(self.angle),
            "kappa": float(self.kappa),
        }


def _chains(pts: np.ndarray):
    """Lower and upper boundary chains of a ccw convex polygon, both increasing in x."""
    n = len(pts)
    order_left = np.lexsort((pts[:, 1], pts[:, 0]))
    i_lb = order_left[0]
    i_lt = np.lexsort((-pts[:, 1], pts[:, 0]))[0]
    i_rb = np.lexsort((pts[:, 1], -pts[:, 0]))[0]
    i_rt = np.lexsort((-pts[:, 1], -pts[:, 0]))[0]
    lower = [i_lb]
    i = i_lb
    while i != i_rb:
        i = (i + 1) % n
        lower.append(i)
    upper = [i_rt]
    i = i_rt
    while i != i_lt:
        i = (i + 1) % n
        upper.append(i)
    lo = pts[lower]
    up = pts[upper][::-1]
    return lo, up


class ConvexDomain:
    """Convex polygon with counterclockwise vertices."""

    def __init__(self, vertices, validate: bool = True):
        v = np.asarray(vertices, dtype=float).reshape(-1, 2)
        keep = np.ones(len(v), dtype=bool)
        nxt = np.roll(v, -1, axis=0)
        keep &= np.any(v != nxt, axis=1)
        v = v[keep]
        if len(v) < 3:
            raise InvalidDomain("a polygon needs at least 3 distinct vertices")
        if _signed_area(v) < 0:
            v = v[::-1].copy()
        self.vertices = v
        if validate:
            self._check_convex()

    def _check_convex(self):
        v = self.vertices
        area = _signed_area(v)
        if not area > 1e-14 * self.scale ** 2:
            raise InvalidDomain("polygon has zero area")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        if np.any(cross < -1e-9 * self.scale ** 2):
            raise InvalidDomain("polygon is not convex")

    # --- basic measurements -------------------------------------------------
    @property
    def bbox(self):
        v = self.vertices
        return (v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max())

    @property
    def scale(self) -> float:
        xmin, ymin, xmax, ymax = self.bbox
        return max(xmax - xmin, ymax - ymin)

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def perimeter(self) -> float:
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        return float(np.hypot(e[:, 0], e[:, 1]).sum())

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cr = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a = cr.sum() / 2
        cx = ((v[:, 0] + w[:, 0]) * cr).sum() / (6 * a)
        cy = ((v[:, 1] + w[:, 1]) * cr).sum() / (6 * a)
        return np.array([cx, cy])

    def halfplanes(self):
        """Outward unit normals ``n`` and offsets ``d`` with ``n.p <= d`` inside."""
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        length = np.hypot(e[:, 0], e[:, 1])
        ok = length > 1e-15 * self.scale
        n = np.column_stack([e[ok, 1], -e[ok, 0]]) / length[ok, None]
        d = np.einsum("ij,ij->i", n, v[ok])
        return n, d

    def contains(self, x, y, tol: float = 0.0, strict: bool = False) -> np.ndarray:
        """Membership test; with ``strict`` the point must be more than ``tol`` inside."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        n, d = self.halfplanes()
        s = np.full(np.broadcast(x, y).shape, -np.inf)
        for (nx_, ny_), dk in zip(n, d):
            s = np.maximum(s, nx_ * x + ny_ * y - dk)
        return s < -tol if strict else s <= tol

    # --- cross-sections -----------------------------------------------------
    def graph(self):
        """``(a, b, g1_points, g2_points)`` with g1 convex below and g2 concave above."""
        lo, up = _chains(self.vertices)
        return float(lo[0, 0]), float(lo[-1, 0]), lo, up

    def sections(self, xs):
        """Vectorised cross-sections: ``(g1, g2, nonempty)`` at each abscissa."""
        a, b, lo, up = self.graph()
        xs = np.asarray(xs, dtype=float)
        tol = 1e-12 * max(1.0, self.scale)
        inside = (xs >= a - tol) & (xs <= b + tol)
        xc = np.clip(xs, a, b)
        g1 = np.interp(xc, lo[:, 0], lo[:, 1])
        g2 = np.interp(xc, up[:, 0], up[:, 1])
        return g1, g2, inside

    def row_sections(self, ys):
        """Cross-sections by horizontal lines: ``(f1, f2, nonempty)``."""
        swapped = ConvexDomain(self.vertices[:, ::-1], validate=False)
        return swapped.sections(ys)

    def to_spec(self):
        return {"type": "polygon", "vertices": self.vertices.tolist()}

    def graph_spec(self):
        a, b, lo, up = self.graph()
        return {"type": "graph", "a": a, "b": b, "g1": lo.tolist(), "g2": up.tolist()}

    @classmethod
    def from_spec(cls, spec: dict) -> "ConvexDomain":
        kind = spec.get("type")
        if kind == "polygon":
            return cls(spec["vertices"])
        if kind == "graph":
            return cls.from_graph(spec["a"], spec["b"], spec["g1"], spec["g2"])
        raise InvalidDomain(f"unknown domain type {kind!r}")

    @classmethod
    def from_graph(cls, a, b, g1, g2) -> "ConvexDomain":
        g1 = np.asarray(g1, dtype=float)
        g2 = np.asarray(g2, dtype=float)
        for g, name in ((g1, "g1"), (g2, "g2")):
            if len(g) < 2 or np.any(np.diff(g[:, 0]) <= 0):
                raise InvalidDomain(f"{name} breakpoints must be strictly increasing in x")
            if abs(g[0, 0] - a) > 1e-12 or abs(g[-1, 0] - b) > 1e-12:
                raise InvalidDomain(f"{name} must span [a, b]")
        s1 = np.diff(g1[:, 1]) / np.diff(g1[:, 0])
        s2 = np.diff(g2[:, 1]) / np.diff(g2[:, 0])
        if np.any(np.diff(s1) < -1e-12) or np.any(np.diff(s2) > 1e-12):
            raise InvalidDomain("g1 must be convex and g2 concave")
        xs = np.union1d(g1[:, 0], g2[:, 0])[1:-1]
        if len(xs) and np.any(
            np.interp(xs, g1[:, 0], g1[:, 1]) >= np.interp(xs, g2[:, 0], g2[:, 1])
        ):
            raise InvalidDomain("g1 < g2 must hold on the open interval")
        verts = list(g1) + list(g2[::-1])
        return cls(np.array(verts))

    def validation_warnings(self):
        out = []
        r = inradius(self)
        if r < 1:
            out.append(f"inradius {r:.4g} < 1")
        return out

    def __repr__(self):
        return f"ConvexDomain({self.vertices.tolist()!r})"


def _signed_area(v: np.ndarray) -> float:
    w = np.roll(v, -1, axis=0)
    return float((v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]).sum() / 2)


def polygon_hull(points) -> ConvexDomain:
    pts = np.asarray(points, dtype=float)
    try:
        hull = ConvexHull(pts)
    except (QhullError, ValueError) as exc:
        raise EmptyRegion(f"degenerate point set: {exc}") from None
    return ConvexDomain(pts[hull.vertices], validate=False)


def clip_halfplane(domain: ConvexDomain, normal, offset) -> ConvexDomain | None:
    """Intersect with ``{p : normal.p <= offset}``; ``None`` if (nearly) empty."""
    v = domain.vertices
    s = v @ np.asarray(normal, dtype=float) - offset
    out = []
    n = len(v)
    for i in range(n):
        j = (i + 1) % n
        if s[i] <= 0:
            out.append(v[i])
        if (s[i] < 0 < s[j]) or (s[j] < 0 < s[i]):
            t = s[i] / (s[i] - s[j])
            out.append(v[i] + t * (v[j] - v[i]))
    if len(out) < 3:
        return None
    out = np.array(out)
    if abs(_signed_area(out)) <= 1e-14 * domain.scale ** 2:
        return None
    return ConvexDomain(out, validate=False)


def cross_section(domain: ConvexDomain, x: float):
    """Closed y-interval of the domain at abscissa ``x``, or ``None`` outside ``[a, b]``."""
    g1, g2, ok = domain.sections(np.array([x]))
    if not ok[0]:
        return None
    return (float(g1[0]), float(g2[0]))


def chebyshev_center(domain: ConvexDomain):
    """Centre and radius of the largest inscribed disc (linear program)."""
    n, d = domain.halfplanes()
    a_ub = np.column_stack([n, np.ones(len(n))])
    res = optimize.linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=a_ub,
        b_ub=d,
        bounds=[(None, None), (None, None), (0, None)],
        method="highs",
    )
    if res.status != 0:
        raise EmptyRegion(f"Chebyshev LP failed: {res.message}")
    return res.x[:2], float(res.x[2])


def _mask_or_raise(region: RegionMask):
    if region.count == 0:
        raise EmptyRegion("empty mask")


def inradius(region) -> float:
    if isinstance(region, ConvexDomain):
        return chebyshev_center(region)[1]
    _mask_or_raise(region)
    padded = np.pad(region.mask, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded)
    return float(dist.max() * region.lattice.spacing)


def _region_points(region) -> np.ndarray:
    if isinstance(region, ConvexDomain):
        return region.vertices
    _mask_or_raise(region)
    pts = region.points()
    if len(pts) > 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    return pts


def diameter(region) -> float:
    pts = _region_points(region)
    if len(pts) < 2:
        return 0.0
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def width_profile(points: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Extent of ``points`` along y after rotating counterclockwise by each theta."""
    proj = points[:, 0:1] * np.sin(thetas)[None, :] + points[:, 1:2] * np.cos(thetas)[None, :]
    return proj.max(axis=0) - proj.min(axis=0)


def min_width_direction(region, resolution: float = WIDTH_RESOLUTION, tie_tol: float | None = None):
    """Rotation angle that makes the region thinnest along y, and that width.

    Angles are swept over ``[0, pi)``; widths within ``tie_tol`` of the minimum
    count as ties and the smallest swept angle wins. The angle is reported in
    ``(-pi/2, pi/2]``.
    """
    pts = _region_points(region)
    n = max(1, int(round(math.pi / resolution)))
    thetas = math.pi * np.arange(n) / n
    w = width_profile(pts, thetas)
    if tie_tol is None:
        if isinstance(region, ConvexDomain):
            tie_tol = 1e-9 * max(1.0, region.scale)
        else:
            tie_tol = 2.0 * region.lattice.spacing
    k = int(np.nonzero(w <= w.min() + tie_tol)[0][0])
    theta = float(thetas[k])
    if theta > math.pi / 2:
        theta -= math.pi
    return theta, float(w[k])


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotate_points(pts, angle: float, center) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if angle == 0:
        return pts.copy()
    center = np.asarray(center, dtype=float)
    return (pts - center) @ rotation_matrix(angle).T + center


def rotate_domain(domain: ConvexDomain, angle: float, center=None) -> ConvexDomain:
    """Rigid counterclockwise rotation about ``center`` (default: the centroid)."""
    if center is None:
        center = domain.centroid
    return ConvexDomain(rotate_points(domain.vertices, angle, center))


def sublevel_region(potential, c: float, lattice: Lattice) -> RegionMask:
    """Nodes of ``lattice`` inside the domain where ``V <= 1 + c``."""
    dom = potential.domain
    if not lattice.covers(dom):
        raise GridMismatch("lattice does not cover the domain")
    X, Y = lattice.mesh()
    inside = dom.contains(X, Y, tol=1e-12 * max(1.0, dom.scale))
    mask = np.zeros(lattice.shape, dtype=bool)
    v = potential.values(X[inside], Y[inside])
    mask[inside] = v <= 1.0 + c
    return RegionMask(lattice, mask)


def _ray_length(domain: ConvexDomain, origin, direction) -> float:
    n, d = domain.halfplanes()
    nd = n @ direction
    slack = d - n @ origin
    pos = nd > 1e-15
    return float(np.min(slack[pos] / nd[pos]))


def john_ellipse(region) -> Ellipse:
    """Inscribed ellipse aligned with the thin direction, plus its covering dilation.

    Starts at the Chebyshev centre with the aspect ratio of the chords through
    it, scales up to tangency, then maximises the area over centre and
    semi-axes with the orientation held fixed.
    """
    poly = region if isinstance(region, ConvexDomain) else region.hull_polygon()
    center, _ = chebyshev_center(poly)
    theta, _ = min_width_direction(poly)
    e1 = np.array([math.cos(theta), -math.sin(theta)])
    e2 = np.array([math.sin(theta), math.cos(theta)])
    n, d = poly.halfplanes()
    a1 = min(_ray_length(poly, center, e1), _ray_length(poly, center, -e1))
    a2 = min(_ray_length(poly, center, e2), _ray_length(poly, center, -e2))
    n1 = n @ e1
    n2 = n @ e2

    def slack(z):
        c = z[:2]
        return d - n @ c - np.sqrt((z[2] * n1) ** 2 + (z[3] * n2) ** 2)

    z0 = np.array([center[0], center[1], a1, a2])
    s = float(np.min((d - n @ center) / np.sqrt((a1 * n1) ** 2 + (a2 * n2) ** 2)))
    z0[2:] *= s
    best = z0
    scale = poly.scale
    try:
        res = optimize.minimize(
            lambda z: -(math.log(max(z[2], 1e-300)) + math.log(max(z[3], 1e-300))),
            z0,
            method="SLSQP",
            constraints=[{"type": "ineq", "fun": slack}],
            bounds=[(None, None), (None, None), (1e-12 * scale, None), (1e-12 * scale, None)],
            options={"maxiter": 200, "ftol": 1e-12},
        )
        z = res.x
        if np.all(np.isfinite(z)) and slack(z).min() >= -1e-10 * scale and z[2] * z[3] > best[2] * best[3]:
            best = z
    except (ValueError, np.linalg.LinAlgError):
        pass
    c = best[:2]
    p, q = float(best[2]), float(best[3])
    angle = math.atan2(e1[1], e1[0])
    if p < q:
        p, q = q, p
        angle += math.pi / 2
    ell = Ellipse(center=np.array(c), p=p, q=q, angle=angle)
    ell.kappa = float(ell.gauge(poly.vertices).max())
    return ell
