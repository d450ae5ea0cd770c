import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

finite = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)
vectors = st.tuples(finite, finite, finite).map(np.array)


@st.composite
def fields(draw, b_min=0.1, b_max=20.0):
    """Random non-degenerate field vector."""
    d = draw(vectors)
    if np.linalg.norm(d) < 1e-3:
        d = np.array([0.0, 0.0, 1.0])
    b = draw(st.floats(b_min, b_max))
    return b * d / np.linalg.norm(d)


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300)


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    """Reference cache shared by the full-scale tests of one session."""
    env = os.environ.get("BORIS_CACHE_DIR")
    return env or str(tmp_path_factory.mktemp("refcache"))


@pytest.fixture(scope="session")
def convergence_report(cache_dir):
    from filtered_boris.harness.checks import acceptance_convergence

    return acceptance_convergence(cache_dir)


@pytest.fixture(scope="session")
def scan_report(cache_dir):
    from filtered_boris.harness.checks import acceptance_scan

    return acceptance_scan(cache_dir)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.LINES):
            terminalreporter.write_line(line)
