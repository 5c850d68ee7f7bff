import numpy as np
import pytest

from modfield import BoxDomain, Grid, power_modulus

# One line per acceptance criterion, printed in the terminal summary so the
# pass/fail ledger is visible on every run.
_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    def _record(number: int, name: str, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        _ACCEPTANCE_LINES.append(f"criterion {number:2d} [{name}]: {status}{suffix}")

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture
def unit_domain() -> BoxDomain:
    return BoxDomain.unit_interval()


@pytest.fixture
def unit_grid(unit_domain) -> Grid:
    return Grid.regular(unit_domain, 65)


@pytest.fixture
def sqrt_modulus():
    return power_modulus(0.5)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=20240817))
