import pytest

from gexprisk.market import gaussian_model, simulate_index

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def gaussian_bundle():
    """b = 0, sigma = 1, r0 = 0, T = 1; 50 000 antithetic paths on 100 steps."""
    return simulate_index(gaussian_model(0.0, 1.0), 0.0, 0.0, 1.0, 100, 50_000, 20240101, antithetic=True)


@pytest.fixture(scope="session")
def pricing_model():
    return gaussian_model(0.0, 1.0, alpha=0.06, beta=0.2)


@pytest.fixture(scope="session")
def pricing_bundle(pricing_model):
    return simulate_index(pricing_model, 0.0, 1.0, 1.0, 100, 50_000, 20240101, antithetic=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
