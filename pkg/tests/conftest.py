import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from groundstate.config import RunConfig
from groundstate.families import suite
from groundstate.pipeline import run_pipeline

settings.register_profile(
    "default",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

CRITERIA: list[tuple[str, bool, str]] = []


def record(criterion: str, passed: bool, detail: str):
    """Remember one acceptance verdict for the end-of-session summary."""
    CRITERIA.append((criterion, bool(passed), detail))
    print(f"{criterion}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in CRITERIA:
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def suite_runs():
    """Every built-in suite instance run once through the full pipeline."""
    return {name: run_pipeline(RunConfig(name=name, **cfg), write=False) for name, cfg in suite().items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def check(report: dict, name: str) -> dict:
    found = [c for c in report["checks"] if c["name"] == name]
    assert len(found) == 1, f"check {name} appears {len(found)} times"
    return found[0]
