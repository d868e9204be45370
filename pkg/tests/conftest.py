import numpy as np
import pytest

from waveguide_pml.assembly import SourceSpec
from waveguide_pml.cross_section import CrossSection, neumann_eigenpairs
from waveguide_pml.geometry import MetricField
from waveguide_pml.harness import StudyConfig
from waveguide_pml.pml import PmlSpec

CRITERIA_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def flat_basis():
    return neumann_eigenpairs(CrossSection(1.0), 8)


@pytest.fixture
def straight_config():
    """Straight guide, mu0 = 20, mode-1 Gaussian at x0 = 3, layer from r = 6."""
    return StudyConfig(MetricField("straight"), PmlSpec(6.0, 2.0, 0.4j), [SourceSpec(1, 3.0, 4.0)], mu0=20.0)


@pytest.fixture
def coarse_config():
    return StudyConfig(
        MetricField("straight"), PmlSpec(6.0, 2.0, 0.4j), [SourceSpec(1, 3.0, 4.0)], mu0=20.0, nx_per_unit=10, ny=10
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for the acceptance summary."""
    lines = request.config.stash.setdefault(CRITERIA_KEY, [])

    def record(number, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(CRITERIA_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
