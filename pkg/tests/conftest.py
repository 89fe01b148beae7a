import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from doublewell.discretization import (
    KernelSpec,
    PotentialSpec,
    build_grid,
    default_x_max,
    double_well_potential,
    interaction_kernel,
)
from doublewell.meanfield import mean_field_spectrum, minimize_hartree

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

_acceptance_key = pytest.StashKey[dict]()


class Physical:
    """Grid, potential, kernel, Hartree minimizer and mode basis for one setting."""

    def __init__(self, L, lam, n, n_modes, s=2.0):
        self.spec = PotentialSpec(s, L)
        x_max = default_x_max(L)
        self.grid = build_grid(-x_max, x_max, n)
        self.V = double_well_potential(self.grid, self.spec)
        self.kernel = interaction_kernel(self.grid, KernelSpec())
        self.lam = lam
        self.hartree = minimize_hartree(self.grid, self.V, self.kernel, lam, tol=1e-10, L=L)
        self.basis = mean_field_spectrum(self.grid, self.V, self.kernel, self.hartree, n_modes)


@functools.lru_cache(maxsize=None)
def physical(L, lam=0.1, n=2049, n_modes=66, s=2.0):
    return Physical(float(L), float(lam), int(n), int(n_modes), float(s))


@pytest.fixture(scope="session")
def phys():
    return physical


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_criterion(request):
    """Store ``(criterion, passed, detail)`` for the end-of-run acceptance summary."""
    table = request.config.stash.setdefault(_acceptance_key, {})

    def record(number, passed, detail=""):
        table[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_acceptance_key, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        passed, detail = table[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {detail}")
