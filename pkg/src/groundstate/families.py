"""Named instance families and the built-in verification suite."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .geometry import ConvexDomain, rotate_domain
from .potential import (
    Potential,
    TentHeight,
    constant,
    height_from_spec,
    trapezoid_domain,
    triangle_affine,
    triangle_domain,
    triangle_example,
)


def rectangle(a: float, b: float, x0: float = 0.0, y0: float = 0.0) -> ConvexDomain:
    return ConvexDomain([[x0, y0], [x0 + a, y0], [x0 + a, y0 + b], [x0, y0 + b]])


def regular_polygon(n: int, radius: float, center=(0.0, 0.0)) -> ConvexDomain:
    t = 2 * np.pi * np.arange(n) / n
    return ConvexDomain(np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]))


def build_family(name: str, params: dict | None = None):
    """``(domain, height)`` for a named family."""
    p = dict(params or {})
    try:
        if name == "constant":
            n = float(p.pop("N"))
            out = rectangle(4 * n, 2 * n), constant()
        elif name == "rectangle":
            a, b = float(p.pop("a")), float(p.pop("b"))
            out = rectangle(a, b), constant()
        elif name in ("triangle_example", "triangle_affine", "trapezoid"):
            n1 = float(p.pop("n1"))
            n2 = float(p.pop("n2", n1 * n1))
            if name == "triangle_example":
                out = triangle_domain(n1, n2), triangle_example(n1, n2)
            elif name == "triangle_affine":
                out = triangle_domain(n1, n2), triangle_affine(n1, n2)
            else:
                taper = float(p.pop("taper", 0.5))
                out = trapezoid_domain(n1, n2, taper), TentHeight(n1, n2, taper)
        else:
            raise ConfigError(f"unknown family {name!r}")
    except KeyError as exc:
        raise ConfigError(f"family {name!r} needs parameter {exc.args[0]!r}") from None
    if p:
        raise ConfigError(f"unexpected family parameters {sorted(p)}")
    return out


def family_N1(name: str, params: dict) -> float:
    """The sweep parameter of a family (its nominal inradius scale)."""
    return float(params["N"] if name == "constant" else params["n1"])


def sweep_params(name: str, value: float, taper: float = 0.5) -> dict:
    if name == "constant":
        return {"N": value}
    if name == "trapezoid":
        return {"n1": value, "n2": value * value, "taper": taper}
    if name in ("triangle_example", "triangle_affine"):
        return {"n1": value, "n2": value * value}
    raise ConfigError(f"no sweep for family {name!r}")


def make_potential(domain_spec: dict, potential_spec: dict):
    """Domain and potential from plain specs; the height spec sits under ``height``."""
    domain = ConvexDomain.from_spec(domain_spec)
    spec = dict(potential_spec)
    height_spec = spec.pop("height", None)
    if height_spec is None:
        raise ConfigError("potential spec needs a 'height' entry")
    extra = set(spec) - {"v_max", "h_floor"}
    if extra:
        raise ConfigError(f"unknown potential keys {sorted(extra)}")
    height = height_from_spec(height_spec, domain)
    return domain, Potential(height, domain, **spec)


def _valley(length: float, width: float, drop: float):
    half = length / 2
    dom = rectangle(length, width, -half, -width / 2)
    s = drop / half
    pot = {"height": {"type": "min_affine", "pieces": [[-s, 0.0, 1.0], [s, 0.0, 1.0]], "renormalize": False}}
    return dom.to_spec(), pot


def suite() -> dict:
    """Built-in instances covering comparable and elongated scales, rotation and a forbidden region.

    The last entry is the ridge example on a long triangle; its height is not
    concave, so its height check fails by construction.
    """
    valley_dom, valley_pot = _valley(40.0, 2.0, 0.5)
    rot_angle = 0.3
    rot_dom = rotate_domain(ConvexDomain.from_spec(valley_dom), rot_angle, (0.0, 0.0))
    rot_pot = {
        "height": {
            "type": "rotated",
            "angle": rot_angle,
            "center": [0.0, 0.0],
            "base": valley_pot["height"],
        }
    }
    pyramid = rectangle(7.0, 7.0, -3.5, -3.5).to_spec()
    q = 0.25
    pyramid_pot = {
        "height": {
            "type": "min_affine",
            "pieces": [[-q, 0.0, 1.0], [q, 0.0, 1.0], [0.0, -q, 1.0], [0.0, q, 1.0]],
            "renormalize": False,
        }
    }
    wedge = trapezoid_domain(3.0, 16.0, 0.5).to_spec()
    wedge_pot = {"height": {"type": "min_affine", "pieces": [[0.0, 0.0, 1.0], [-0.04, 0.0, 1.0]]}}
    return {
        "rect_2x1": {"domain": rectangle(2.0, 1.0).to_spec(), "potential": {"height": {"type": "constant"}}},
        "rect_8x1": {"domain": rectangle(8.0, 1.0).to_spec(), "potential": {"height": {"type": "constant"}}},
        "cone_32gon": {
            "domain": regular_polygon(32, 1.7).to_spec(),
            "potential": {"height": {"type": "cone", "peak": [0.0, 0.0], "slope": 0.5}},
        },
        "valley": {"domain": valley_dom, "potential": valley_pot},
        "valley_rotated": {"domain": rot_dom.to_spec(), "potential": rot_pot},
        "pyramid": {"domain": pyramid, "potential": pyramid_pot},
        "wedge": {"domain": wedge, "potential": wedge_pot},
        "triangle_4_64": {"family": {"name": "triangle_example", "params": {"n1": 4, "n2": 64}}},
    }


def rectangle_eigenvalue(a: float, b: float) -> float:
    """Ground-state energy of ``-Laplacian + 1`` on an ``a x b`` rectangle."""
    return 1 + math.pi ** 2 * (1 / a ** 2 + 1 / b ** 2)
