"""End-to-end run: scales, cross-sections, the 2D ground state, then every enabled check."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .checks import CheckResult
from .config import RunConfig
from .eig2d import EigenPair2D, assemble_from_grid, first_eig_2d, gershgorin_lower, h_profile, log_concavity_check
from .errors import LevelEmpty
from .families import build_family, make_potential
from .geometry import ConvexDomain, Lattice, diameter, inradius
from .grid import build_grid, default_spacing
from .potential import Potential, validate_height
from .scales import ScaleReport, check_scale_bounds, compute_L1, compute_L2, orient_domain
from .sturm1d import MuProfile, mu_profile, operator_A_first_eig


SHIFT_FRACTION = 0.999  # inverse-iteration shift, as a fraction of the way from Gershgorin to mu_A


@dataclass
class Instance:
    domain: ConvexDomain
    potential: Potential
    spec: dict


def load_instance(config: RunConfig) -> Instance:
    if config.family is not None:
        domain, height = build_family(config.family["name"], config.family.get("params"))
        spec = {"family": config.family}
        return Instance(domain, Potential(height, domain), spec)
    domain, potential = make_potential(config.domain, config.potential)
    return Instance(domain, potential, {"domain": config.domain, "potential": config.potential})


def spec_hash(spec: dict) -> str:
    return hashlib.sha256(json.dumps(spec, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class ScaleStage:
    scales: ScaleReport
    domain: ConvexDomain  # oriented
    potential: Potential
    profile: MuProfile
    lattice: Lattice
    spacing: float


def run_scales(instance: Instance, config: RunConfig) -> ScaleStage:
    tol = config.tol
    domain, potential = instance.domain, instance.potential
    lattice0 = None
    try:
        potential.sublevel_polygon(1.0)
    except NotImplementedError:
        s0 = config.spacing or default_spacing(inradius(domain))
        lattice0 = Lattice.covering(domain, s0)
    l1 = compute_L1(domain, potential, lattice0)
    dom_o, pot_o, theta = orient_domain(domain, potential, l1.L1, l1.region if lattice0 is None else None)
    spacing = config.spacing or default_spacing(l1.L1)
    lattice = Lattice.covering(dom_o, spacing)
    profile = mu_profile(dom_o, pot_o, lattice.xs, spacing, lattice.y0)
    L2, I, comparable = compute_L2(profile, l1.L1, l1.L1_tilde, tol.C_tilde)
    N1, N2 = inradius(domain), diameter(domain)
    report = ScaleReport(
        l1.L1, l1.L1_tilde, theta, L2, I, comparable, tol.C_tilde, N1, N2, profile.mu_star, profile.x_star
    )
    report.bound_checks = check_scale_bounds(report, N1)
    return ScaleStage(report, dom_o, pot_o, profile, lattice, spacing)


@dataclass
class SolveStage:
    pair: EigenPair2D
    mu_A: float
    gershgorin: float


def run_solve(stage: ScaleStage, config: RunConfig) -> SolveStage:
    grid = build_grid(stage.domain, stage.potential, lattice=stage.lattice)
    op = assemble_from_grid(grid)
    xmin, _, xmax, _ = stage.domain.bbox
    mu_A = operator_A_first_eig(stage.profile, extent=(xmin, xmax))
    g = gershgorin_lower(op.matrix)
    # the discrete sandwich puts lambda above mu_A, so this shift keeps A - shift definite
    shift = g + SHIFT_FRACTION * (mu_A - g) if mu_A > g else None
    pair = first_eig_2d(op, shift=shift, preconditioner=config.preconditioner)
    return SolveStage(pair, mu_A, g)


def _profile_check(profile: MuProfile) -> CheckResult:
    d2min, tol = profile.convexity_defect()
    return CheckResult(
        "mu_convexity",
        "mu(x) is convex in x for a concave height",
        {"min second difference/tol": d2min / tol},
        {"min": -1.0},
        d2min >= -tol,
    )


def _height_check(instance: Instance, seed: int) -> CheckResult:
    rep = validate_height(instance.potential.height, instance.domain, seed=seed)
    return CheckResult(
        "height_concavity",
        "the height is concave with maximum 1 on the domain",
        {
            "max_h": rep.max_h,
            "min_h": rep.min_h,
            "concavity_violations": rep.concavity_violations,
            "pairs": rep.pairs,
        },
        {"violations": 0},
        rep.passed,
        notes="; ".join(rep.failures),
    )


def run_checks(instance: Instance, stage: ScaleStage, solved: SolveStage, config: RunConfig):
    tol = config.tol
    enabled = set(config.checks)
    sc = stage.scales
    pair = solved.pair
    L1, L2 = sc.L1, sc.L2
    checks: list[CheckResult] = []
    extras: dict = {}
    if "height" in enabled:
        checks.append(_height_check(instance, config.seed))
    if "scales" in enabled:
        checks.extend(sc.bound_checks)
    if "profile" in enabled:
        checks.append(_profile_check(stage.profile))
    if "eigenvalue" in enabled:
        checks.extend(analysis.verify_eigenvalue_bounds(pair.lam, solved.mu_A, L1, L2, stage.spacing, tol.C_max))
    hprof = h_profile(pair)
    if "carleman" in enabled:
        checks.extend(
            analysis.verify_carleman_decay(
                hprof,
                stage.profile,
                pair.lam,
                L1,
                L2,
                sc.x_star,
                analysis.residual_allowance(pair),
                elongated=not sc.comparable,
                decay_C=tol.decay_C,
            )
        )
    if "mass" in enabled:
        checks.extend(analysis.verify_mass_bounds(pair, hprof, L1, L2, sc.x_star, tol))
    if "level_shape" in enabled:
        try:
            shape, reports, ecc = analysis.verify_level_shape(pair, stage.potential, L1, L2, config.levels, tol)
        except LevelEmpty as exc:
            shape = [CheckResult("level_shape", "superlevel sets are nonempty", {}, {}, False, notes=str(exc))]
            reports, ecc = {}, {}
        checks.extend(shape)
        extras["level_sets"] = reports
        extras["eccentricity"] = ecc
    if "max_gradients" in enabled:
        checks.extend(analysis.verify_max_and_gradients(pair, stage.potential, L1, L2, tol))
    if "log_concavity" in enabled:
        checks.append(analysis.verify_log_concavity(log_concavity_check(pair)))
    if "agmon" in enabled:
        fld = analysis.agmon_distance(stage.potential, pair.lam, L1, pair.grid, tol.agmon_C, config.agmon_weight)
        checks.append(analysis.verify_agmon(pair, fld, L1, L2, tol.C_agmon, tol.agmon_u_floor))
    if "dpsi" in enabled:
        checks.append(analysis.verify_dpsi(stage.domain, stage.potential, L2, sc.I, stage.lattice, 5, tol.C_psi))
    return checks, hprof, extras


def jsonable(v):
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else None
    return v


@dataclass
class RunResult:
    report: dict
    checks: list
    exit_code: int
    artifacts: dict = field(default_factory=dict)


def run_pipeline(config: RunConfig, write: bool = True, solve_only: bool = False) -> RunResult:
    """Run everything and, when ``write`` is set, place the artifacts in ``config.output_dir``.

    Artifacts are assembled in a scratch directory and moved into place only
    after the run succeeds, so a failed run leaves nothing behind.
    """
    instance = load_instance(config)
    stage = run_scales(instance, config)
    solved = run_solve(stage, config)
    if solve_only:
        checks, hprof, extras = [], h_profile(solved.pair), {}
    else:
        checks, hprof, extras = run_checks(instance, stage, solved, config)
    summary = {
        "passed": sum(c.verdict == "pass" for c in checks),
        "failed": sum(c.verdict == "fail" for c in checks),
        "skipped": sum(c.verdict == "skipped" for c in checks),
    }
    pair = solved.pair
    report = {
        "config": config.resolved(),
        "instance": {
            "spec_hash": spec_hash(instance.spec),
            "domain": instance.domain.to_spec(),
            "oriented_domain": stage.domain.to_spec(),
            "potential": instance.potential.to_spec(),
        },
        "scales": stage.scales.to_dict(),
        "eigen": {
            "lambda": pair.lam,
            "mu": solved.mu_A,
            "mu_star": stage.scales.mu_star,
            "residual": pair.residual,
            "iterations": pair.iterations,
            "shift": pair.shift,
            "gershgorin": solved.gershgorin,
        },
        "grid": pair.grid.metadata(),
        "checks": [c.to_dict() for c in checks],
        "level_sets": {f"{c:g}": r.to_dict() for c, r in extras.get("level_sets", {}).items()},
        "eccentricity": extras.get("eccentricity", {}),
        "summary": summary,
    }
    report = jsonable(report)
    code = 2 if summary["failed"] else 0
    result = RunResult(report, checks, code)
    if write and config.output_dir:
        result.artifacts = write_artifacts(Path(config.output_dir), report, pair, hprof, stage.profile, extras)
    return result


def report_bytes(report: dict) -> bytes:
    return (json.dumps(report, sort_keys=True, indent=2) + "\n").encode()


def write_artifacts(out: Path, report: dict, pair: EigenPair2D, hprof, profile: MuProfile, extras: dict) -> dict:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".run-", dir=out.parent))
    try:
        (tmp / "report.json").write_bytes(report_bytes(report))
        grid = pair.grid
        X, Y = grid.lattice.mesh()
        m = grid.mask
        _write_csv(tmp / "u.csv", ("x", "y", "u"), zip(X[m], Y[m], pair.u[m]))
        _write_csv(tmp / "H.csv", ("x", "H"), hprof.rows())
        _write_csv(tmp / "mu.csv", ("x", "mu", "capped"), profile.rows())
        lv = tmp / "levelsets"
        lv.mkdir()
        for c, rep in extras.get("level_sets", {}).items():
            rows = ((k, x, y) for k, cc in enumerate(rep.contours) for x, y in cc)
            _write_csv(lv / f"level_{c:g}.csv", ("contour", "x", "y"), rows)
        if out.exists():
            shutil.rmtree(out)
        tmp.rename(out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return {p.relative_to(out).as_posix(): p.stat().st_size for p in sorted(out.rglob("*")) if p.is_file()}


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
