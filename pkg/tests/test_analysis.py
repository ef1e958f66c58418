import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groundstate.analysis import (
    NEIGHBOURS,
    AgmonField,
    Tolerances,
    agmon_distance,
    agmon_field_from_arrays,
    edge_weight,
    verify_agmon,
    verify_carleman_decay,
    verify_dpsi,
    verify_eigenvalue_bounds,
    verify_level_shape,
    verify_mass_bounds,
    verify_max_and_gradients,
)
from groundstate.eig2d import HProfile, assemble_2d, first_eig_2d, h_profile
from groundstate.families import rectangle, rectangle_eigenvalue
from groundstate.geometry import Lattice
from groundstate.potential import Potential, constant
from groundstate.sturm1d import MuProfile, mu_profile, operator_A_first_eig

from conftest import check


@pytest.fixture(scope="module")
def rect():
    """Ground state of -Laplacian + 1 on [0, 2] x [0, 1] with spacing 1/32."""
    dom = rectangle(2.0, 1.0)
    pot = Potential(constant(), dom)
    h = 1 / 32
    op = assemble_2d(dom, pot, h)
    pair = first_eig_2d(op)
    lat = op.grid.lattice
    prof = mu_profile(dom, pot, lat.xs, h, lat.y0)
    return dom, pot, pair, prof


def synthetic_profile(mu, dx):
    n = len(mu)
    return MuProfile(np.arange(n) * dx, np.asarray(mu, float), np.zeros(n, bool), np.ones(n, bool), np.full(n, 10), dx, 1e8)


# --- eigenvalue bounds -------------------------------------------------------------------


def test_rectangle_sandwich_is_tight(rect):
    dom, _, pair, prof = rect
    mu = operator_A_first_eig(prof, extent=(0.0, 2.0))
    sandwich, ground = verify_eigenvalue_bounds(pair.lam, mu, 0.5, 0.5, pair.spacing)
    assert sandwich.passed and ground.passed
    assert sandwich.measured["C_meas"] == pytest.approx(0.0, abs=1e-9)


def test_corrupted_mu_fails_lower_bound(rect):
    _, _, pair, prof = rect
    mu = operator_A_first_eig(prof, extent=(0.0, 2.0)) + 1.0
    sandwich, _ = verify_eigenvalue_bounds(pair.lam, mu, 0.5, 0.5, pair.spacing)
    assert not sandwich.passed
    assert "below mu" in sandwich.notes


def test_large_gap_fails_upper_bound():
    sandwich, _ = verify_eigenvalue_bounds(20.0, 10.0, 0.5, 3.0, 0.01, C_max=50.0)
    assert sandwich.measured["C_meas"] == pytest.approx(90.0)
    assert not sandwich.passed


# --- Carleman ----------------------------------------------------------------------------------


def test_rectangle_satisfies_carleman(rect):
    _, _, pair, prof = rect
    ineq, decay = verify_carleman_decay(h_profile(pair), prof, pair.lam, 0.5, 0.5, 1.0, elongated=False)
    assert ineq.passed
    assert ineq.measured["fraction_holding"] == 1.0
    assert decay.skipped


def test_exponential_profile_passes_with_its_rate():
    # H = exp(-r |x - x*|) solves H'' = r^2 H away from x*, which is 2 (mu - lambda) H for mu - lambda = r^2 / 2
    dx, r, lam = 0.01, 2.0, 5.0
    x = np.arange(2001) * dx
    x_star = 10.0
    H = np.exp(-r * np.abs(x - x_star))
    prof = synthetic_profile(np.full(len(x), lam + r * r / 2), dx)
    L2 = 1.0
    ineq, decay = verify_carleman_decay(h_profile_from(x, H), prof, lam, 0.1, L2, x_star)
    assert ineq.passed
    assert decay.passed
    assert decay.measured["rate*L2"] == pytest.approx(r * L2, rel=1e-9)


def test_decay_outside_band_fails():
    dx, r, lam = 0.01, 15.0, 5.0
    x = np.arange(2001) * dx
    H = np.exp(-r * np.abs(x - 10.0))
    prof = synthetic_profile(np.full(len(x), lam + r * r / 2), dx)
    _, decay = verify_carleman_decay(h_profile_from(x, H), prof, lam, 0.01, 1.0, 10.0)
    assert decay.measured["rate*L2"] > 10
    assert not decay.passed


def test_constant_profile_above_lambda_fails():
    dx = 0.01
    n = 500
    prof = synthetic_profile(np.full(n, 6.0), dx)
    ineq, _ = verify_carleman_decay(h_profile_from(prof.x, np.ones(n)), prof, 5.0, 0.1, 1.0, 2.5)
    assert not ineq.passed
    assert ineq.measured["fraction_holding"] == 0.0


def h_profile_from(x, H):
    return HProfile(np.asarray(x, float), np.asarray(H, float))


# --- mass -------------------------------------------------------------------------------------


def test_rectangle_mass_is_quarter_area(rect):
    _, _, pair, _ = rect
    checks = verify_mass_bounds(pair, h_profile(pair), 0.5, 0.5, 1.0)
    total = next(c for c in checks if c.name == "mass_total")
    # int sin^2(pi x / 2) sin^2(pi y) over [0, 2] x [0, 1] is 1/2
    assert total.measured["int u^2/(L1 L2)"] * 0.25 == pytest.approx(0.5, rel=1e-9)
    assert all(c.passed for c in checks)


# --- level shape, maximum, gradients --------------------------------------------------------------


def test_rectangle_level_shape(rect):
    _, pot, pair, _ = rect
    checks, reports, ecc = verify_level_shape(pair, pot, 0.5, 0.5)
    assert [c.name for c in checks] == ["level_shape_0.25", "level_shape_0.5", "level_shape_0.75"]
    assert all(c.passed for c in checks)
    # {sin(pi y) >= c'} at c = 0.5 through the centre: y-extent (1 - 2 asin(1/2)/pi) = 2/3
    assert checks[1].measured["y_extent/L1"] == pytest.approx(4 / 3, abs=4 * pair.spacing)
    assert set(ecc["eccentricity"]) == {"0.25", "0.5", "0.75"}


def test_level_outside_margin_is_skipped(rect):
    _, pot, pair, _ = rect
    checks, _, _ = verify_level_shape(pair, pot, 0.5, 0.5, levels=(0.05,))
    assert checks[0].skipped


def test_rectangle_maximum_and_gradients(rect):
    _, pot, pair, _ = rect
    checks = {c.name: c for c in verify_max_and_gradients(pair, pot, 0.5, 0.5)}
    assert all(c.passed for c in checks.values())
    # V - lambda = 1 - lambda at the centre
    lam_exact = rectangle_eigenvalue(2.0, 1.0)
    assert checks["max_location"].measured["c_star"] == pytest.approx((lam_exact - 1) * 0.25, rel=1e-3)
    assert checks["max_location"].measured["x_max"] == pytest.approx(1.0, abs=pair.spacing)


def test_eps_superlevel_inradius_matches_analytic(rect):
    _, pot, pair, _ = rect
    eps = 0.04
    c = next(c for c in verify_max_and_gradients(pair, pot, 0.5, 0.5) if c.name == "eps_superlevel_0.04")
    # the inradius of {sin(pi x/2) sin(pi y) >= 0.96} is about its half-width in y through the centre
    half = 0.5 - math.asin(1 - eps) / math.pi
    measured = c.measured["inradius/(eps^(1/2) L1)"] * math.sqrt(eps) * 0.5
    assert measured == pytest.approx(half, abs=pair.spacing)


# --- Agmon distance -----------------------------------------------------------------------------


def square_field(n, centre_source=True):
    region = np.ones((n, n), bool)
    sources = np.zeros((n, n), bool)
    if centre_source:
        sources[n // 2, n // 2] = True
    return region, sources


def test_constant_weight_matches_half_euclidean_distance():
    w, h, n = 3.0, 0.05, 97
    region, sources = square_field(n)
    hstar = agmon_field_from_arrays(np.full((n, n), w * w), region, sources, h, weight="continuum")
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    dist = h * np.hypot(i - n // 2, j - n // 2)
    # the 8-connected path overshoots the straight line by at most 8.3%, which stays below 2 h w out to 48 h
    near = dist <= 48 * h
    assert np.max(np.abs(hstar[near] - 0.5 * w * dist[near])) <= 2 * h * w
    assert hstar[n // 2, n // 2] == 0.0


def test_constant_weight_is_exact_along_a_strip():
    w, h = 2.0, 0.1
    region = np.ones((200, 5), bool)
    sources = np.zeros_like(region)
    sources[0, :] = True
    hstar = agmon_field_from_arrays(np.full(region.shape, w * w), region, sources, h, weight="continuum")
    assert hstar[:, 2] == pytest.approx(0.5 * w * h * np.arange(200), rel=1e-12)


def test_radial_weight_matches_straight_line_integral():
    # nu = (1 + r)^2 around the source; rays are geodesics and h* = (r + r^2 / 2) / 2
    h, n = 0.02, 121
    region, sources = square_field(n)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    r = h * np.hypot(i - n // 2, j - n // 2)
    hstar = agmon_field_from_arrays((1 + r) ** 2, region, sources, h, weight="continuum")
    exact = 0.5 * (r + r ** 2 / 2)
    di, dj = i - n // 2, j - n // 2
    on_lattice_dirs = (di == 0) | (dj == 0) | (np.abs(di) == np.abs(dj))
    far = r >= 10 * h
    rel = hstar[far] / exact[far]
    assert np.all(np.abs(rel[on_lattice_dirs[far]] - 1) <= 0.05)
    # off those directions the octile path is longer by at most sqrt(4 - 2 sqrt(2)) - 1, about 8.3%
    assert np.all((rel >= 1 - 0.05) & (rel <= 1.083 + 0.05))


def test_lattice_weight_is_below_continuum_and_agrees_for_small_steps():
    x = np.array([1e-3, 0.1, 1.0, 100.0])
    lattice = edge_weight(x, 1.0, "lattice")
    continuum = edge_weight(x, 1.0, "continuum")
    assert np.all(lattice <= continuum)
    assert lattice[0] == pytest.approx(continuum[0], rel=1e-6)
    assert lattice[-1] == pytest.approx(math.asinh(50.0))
    with pytest.raises(ValueError):
        edge_weight(x, 1.0, "geodesic")


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from(["lattice", "continuum"]))
def test_agmon_distance_is_a_shortest_path_metric(seed, weight):
    rng = np.random.default_rng(seed)
    n, h = 25, 0.1
    region = rng.random((n, n)) < 0.85
    sources = region & (rng.random((n, n)) < 0.03)
    nu = rng.uniform(0, 50, (n, n))
    hs = agmon_field_from_arrays(nu, region, sources, h, weight)
    assert np.all(hs[sources] == 0)
    assert np.all(hs[region] >= 0)
    assert np.all(np.isinf(hs[~region]))
    root = np.sqrt(nu)
    # every edge satisfies the triangle inequality h*(q) <= h*(p) + w(p, q)
    for di, dj in NEIGHBOURS:
        for a in range(n):
            for b in range(n):
                c, d = a + di, b + dj
                if not (0 <= c < n and 0 <= d < n and region[a, b] and region[c, d]):
                    continue
                wpq = edge_weight(0.5 * (root[a, b] + root[c, d]), h * math.hypot(di, dj), weight)
                if np.isfinite(hs[a, b]):
                    assert hs[c, d] <= hs[a, b] + wpq + 1e-9
                    assert hs[a, b] <= hs[c, d] + wpq + 1e-9


def test_agmon_skips_on_empty_region(rect):
    _, pot, pair, _ = rect
    fld = agmon_distance(pot, pair.lam, 0.5, pair.grid)
    assert fld.empty
    assert verify_agmon(pair, fld, 0.5, 0.5).skipped


def test_weighted_mass_dominates_unweighted(suite_runs):
    for name in ("cone_32gon", "pyramid", "triangle_4_64"):
        c = check(suite_runs[name].report, "agmon")
        assert c["verdict"] == "pass"
        assert c["measured"]["weighted/(L1 L2)"] >= c["measured"]["unweighted/(L1 L2)"]


def test_agmon_without_sources_is_skipped(rect):
    _, _, pair, _ = rect
    region = pair.grid.mask.copy()
    fld = AgmonField(region, np.zeros_like(region), np.ones(region.shape), np.full(region.shape, np.inf))
    c = verify_agmon(pair, fld, 0.5, 0.5)
    assert c.skipped and "inner boundary" in c.notes


# --- cross-sectional eigenfunction -----------------------------------------------------------------


def test_dpsi_zero_on_rectangle():
    dom = rectangle(2.0, 1.0)
    lat = Lattice.covering(dom, 1 / 32)
    c = verify_dpsi(dom, Potential(constant(), dom), 0.5, (0.5, 1.5), lat)
    assert c.passed
    assert c.measured["max dpsi L2^2"] == pytest.approx(0.0, abs=1e-20)


def test_dpsi_notes_samples_at_the_edge():
    dom = rectangle(2.0, 1.0)
    lat = Lattice.covering(dom, 1 / 32)
    # the middle half of [-2, 2] reaches x = -1 .. 1, and the columns at x <= 0 are empty
    c = verify_dpsi(dom, Potential(constant(), dom), 0.5, (-2.0, 2.0), lat)
    assert "domain edge" in c.notes
    assert 0 < c.measured["samples"] < 5


def test_tolerance_defaults_are_pinned():
    t = Tolerances()
    assert (t.C_max, t.K_shape, t.c_star_floor, t.C_agmon, t.C_psi, t.agmon_C) == (50, 6, 0.01, 100, 50, 16)
