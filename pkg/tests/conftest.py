import numpy as np
import pytest

from foldtail.jumpmap import BranchSpec, LossMap
from foldtail.sampling import AlphaDistribution

_ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else "")
    print(line)
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def gpd_oracle_sample(xi, beta, n, rng):
    """Inverse-CDF GPD draws: y = beta*((1-q)**(-xi) - 1)/xi, exponential at xi = 0."""
    q = rng.random(n)
    if xi == 0:
        return -beta * np.log1p(-q)
    return beta * ((1.0 - q) ** (-xi) - 1.0) / xi


@pytest.fixture
def scenario_a():
    return (BranchSpec("Divergent", 0.5, 1.0, 0.0), LossMap(2.0), AlphaDistribution.uniform(0.0, 1.0))


@pytest.fixture
def scenario_b():
    return (BranchSpec("Bounded", 0.5, 1.0, 0.0), LossMap(2.0), AlphaDistribution.pareto(1.0, 2.0, 0.0))
