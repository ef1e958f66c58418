import csv
import json
import math

import pytest

from groundstate.cli import OUTPUT_ENV, fit_slope, main, sweep_scaling
from groundstate.config import CHECK_GROUPS, RunConfig
from groundstate.errors import ConfigError, SweepTooSmall
from groundstate.families import rectangle, rectangle_eigenvalue

RECT = {
    "domain": rectangle(2.0, 1.0).to_spec(),
    "potential": {"height": {"type": "constant"}},
    "spacing": 1 / 16,
}
TENT = {"family": {"name": "triangle_example", "params": {"n1": 2, "n2": 8}}, "spacing": 1 / 8}


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


# --- configuration ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "bad",
    [
        {**RECT, "colour": "red"},
        {**RECT, "tolerances": {"no_such_tolerance": 1.0}},
        {**RECT, "tolerances": {"C_max": -1.0}},
        {**RECT, "tolerances": {"C_max": True}},
        {**RECT, "checks": ["eigenvalue", "telepathy"]},
        {**RECT, "spacing": 0.0},
        {**RECT, "preconditioner": "ilu"},
        {**RECT, "agmon_weight": "euclid"},
        {**RECT, "levels": [0.5, 1.0]},
        {**RECT, "family": {"name": "constant", "params": {"N": 1}}},
        {"domain": RECT["domain"]},
        {"family": {"params": {"N": 1}}},
    ],
)
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_resolved_config_fills_tolerance_defaults():
    cfg = RunConfig.from_dict(RECT)
    res = cfg.resolved()
    assert res["checks"] == list(CHECK_GROUPS)
    assert set(res["tolerances"]) >= {"C_max"}
    assert all(v > 0 for v in res["tolerances"].values())
    assert "output_dir" not in res


def test_non_object_config_rejected(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(write_config(tmp_path, [1, 2, 3]))


# --- run commands ---------------------------------------------------------------------


def test_verify_rectangle_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["verify", write_config(tmp_path, RECT), "-o", str(out)])
    assert code == 0
    names = sorted(p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file())
    assert {"report.json", "u.csv", "H.csv", "mu.csv"} <= set(names)
    assert [n for n in names if n.startswith("levelsets/")] == [
        "levelsets/level_0.25.csv",
        "levelsets/level_0.5.csv",
        "levelsets/level_0.75.csv",
    ]
    report = json.loads((out / "report.json").read_text())
    assert report["eigen"]["lambda"] == pytest.approx(rectangle_eigenvalue(2.0, 1.0), rel=0.01)
    assert report["summary"]["failed"] == 0
    assert report["config"]["spacing"] == RECT["spacing"]
    with open(out / "u.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "u"]
    assert max(float(r[2]) for r in rows[1:]) == pytest.approx(1.0)
    assert "0 failed" in capsys.readouterr().out


def test_every_enabled_check_group_is_reported(tmp_path):
    out = tmp_path / "run"
    main(["verify", write_config(tmp_path, {**RECT, "checks": ["eigenvalue", "mass"]}), "-o", str(out)])
    report = json.loads((out / "report.json").read_text())
    names = {c["name"] for c in report["checks"]}
    assert names and all(c["verdict"] in ("pass", "fail", "skipped") for c in report["checks"])
    assert not any(n.startswith("agmon") or n.startswith("carleman") for n in names)


def test_failed_check_exits_two(tmp_path):
    # the ridge height is not concave, so its height check fails
    out = tmp_path / "run"
    assert main(["verify", write_config(tmp_path, TENT), "-o", str(out)]) == 2
    report = json.loads((out / "report.json").read_text())
    verdicts = {c["name"]: c["verdict"] for c in report["checks"]}
    assert verdicts["height_concavity"] == "fail"


def test_solve_only_runs_no_checks(tmp_path):
    out = tmp_path / "run"
    assert main(["solve", write_config(tmp_path, RECT), "-o", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["checks"] == []


def test_output_env_var(tmp_path, monkeypatch, capsys):
    out = tmp_path / "from_env"
    monkeypatch.setenv(OUTPUT_ENV, str(out))
    assert main(["verify", write_config(tmp_path, {**RECT, "checks": ["eigenvalue"]})]) == 0
    assert (out / "report.json").exists()
    # -o wins over the environment
    other = tmp_path / "from_flag"
    assert main(["verify", write_config(tmp_path, {**RECT, "checks": ["eigenvalue"]}), "-o", str(other)]) == 0
    assert (other / "report.json").exists()


def test_report_goes_to_stdout_without_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert main(["solve", write_config(tmp_path, RECT)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["eigen"]["lambda"] > 1


@pytest.mark.parametrize(
    "text",
    ['{"domain": ', json.dumps({**RECT, "unknown": 1}), json.dumps({**RECT, "spacing": -1})],
)
def test_bad_config_exits_one_with_error_json(tmp_path, capsys, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    out = tmp_path / "run"
    assert main(["verify", str(path), "-o", str(out)]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"
    assert not out.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["bad.json"]


def test_missing_config_file_exits_one(tmp_path, capsys):
    assert main(["scales", str(tmp_path / "nope.json")]) == 1
    assert "error" in json.loads(capsys.readouterr().err)


def test_scales_command(tmp_path, capsys):
    assert main(["scales", write_config(tmp_path, RECT)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert 0.5 / (1 + 1e-3) <= out["L1"] <= 0.5
    assert out["L1_tilde"] == pytest.approx(math.hypot(2, 1))


def test_oracle_command(tmp_path, capsys):
    assert main(["oracle", write_config(tmp_path, {**RECT, "spacing": 0.1})]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["lambda_diff"] <= 1e-8
    assert out["mu_max_diff"] <= 1e-9


# --- sweeps -----------------------------------------------------------------------------


def test_fit_slope_of_exact_power_law():
    n = [2.0, 4.0, 8.0, 16.0]
    assert fit_slope(n, [3 * v ** 0.4 for v in n]) == pytest.approx(0.4)


def test_constant_sweep_slope_is_one():
    rows, slope = sweep_scaling("constant", [4, 8, 16, 32])
    assert [r["N1"] for r in rows] == [4, 8, 16, 32]
    assert slope == pytest.approx(1.0, abs=0.05)


def test_parallel_sweep_matches_serial():
    serial = sweep_scaling("triangle_affine", [4, 8, 16])
    parallel = sweep_scaling("triangle_affine", [4, 8, 16], workers=2)
    assert serial == parallel


def test_short_sweep_rejected():
    with pytest.raises(SweepTooSmall):
        sweep_scaling("constant", [4])


def test_sweep_command(tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["sweep", "constant", "4,8,16", "-o", str(out)]) == 0
    text = capsys.readouterr().out
    last = text.strip().splitlines()[-1].split()
    assert last[0] == "slope" and float(last[1]) == pytest.approx(1.0, abs=0.01)
    summary = json.loads((out / "sweep_constant.json").read_text())
    assert summary["slope"] == pytest.approx(1.0, abs=0.01)
    assert (out / "sweep_constant.csv").read_text().startswith("N1,")


def test_sweep_command_too_small(capsys):
    assert main(["sweep", "constant", "4"]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "SweepTooSmall"
