import numpy as np
import pytest
from hypothesis import settings

from ugwkit.geometry import space_from_points

settings.register_profile("suite", deadline=None, max_examples=50, derandomize=True)
settings.load_profile("suite")


# ---------------------------------------------------------------------------
# Acceptance criterion registry. test_acceptance.py records one line per
# criterion; the hook below prints them after the run so a plain `pytest`
# invocation ends with a PASS/FAIL line for each.

_CRITERIA = {}


def register_criterion(num, passed, detail):
    _CRITERIA[num] = (bool(passed), str(detail))


@pytest.fixture
def criterion():
    """Record the outcome for one acceptance criterion and assert it."""

    def check(num, passed, detail):
        register_criterion(num, passed, detail)
        assert passed, f"criterion {num:02d}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        passed, detail = _CRITERIA[num]
        word = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num:02d}: {word} - {detail}")


# ---------------------------------------------------------------------------
# Shared instance builders.


def random_space(rng, n, dim=2, weights="uniform"):
    """Euclidean mm-space on a Gaussian cloud.

    weights: "uniform" (probability), "random" (random probability) or
    "mass" (arbitrary positive total mass).
    """
    pts = rng.normal(size=(n, dim))
    if weights == "uniform":
        w = np.full(n, 1.0 / n)
    elif weights == "random":
        w = rng.uniform(0.2, 1.0, size=n)
        w = w / w.sum()
    elif weights == "mass":
        w = rng.uniform(0.2, 1.5, size=n)
    else:
        raise ValueError(weights)
    return space_from_points(pts, weights=w)


def random_plan(rng, n, m, scale=1.0):
    return scale * rng.uniform(0.05, 1.0, size=(n, m))
