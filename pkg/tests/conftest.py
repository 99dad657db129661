import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, derandomize=True, print_blob=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def principal_angle(A, B):
    """Largest principal angle between the row spans of A and B."""
    qa, _ = np.linalg.qr(np.atleast_2d(A).T)
    qb, _ = np.linalg.qr(np.atleast_2d(B).T)
    # sine form: accurate for small angles, unlike arccos of the cosines
    resid = qb - qa @ (qa.T @ qb)
    s = np.linalg.svd(resid, compute_uv=False)
    return float(np.arcsin(np.clip(s.max(), 0.0, 1.0)))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
