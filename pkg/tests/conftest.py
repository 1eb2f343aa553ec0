import pytest


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    label = report.nodeid.split("::")[-1].replace("test_criterion_", "").replace("_", " ")
    print(f"\n[ACCEPTANCE] criterion {label}: {'PASS' if report.passed else 'FAIL'}", flush=True)

from churnkit.panel import build_panel, rolling_features
from churnkit.synth import generate, two_group_spec


@pytest.fixture(scope="session")
def small_cohort():
    """A 150-user two-class cohort shared by the read-only tests."""
    spec = two_group_spec(n_users=150, seed=7)
    events, truth = generate(spec)
    panel = rolling_features(build_panel(events, truth.panel_end))
    return spec, events, truth, panel


@pytest.fixture(scope="session")
def small_panel(small_cohort):
    return small_cohort[3]
