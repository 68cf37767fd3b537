import pytest

from dimerchain.geometry import ChainParams

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def dilute():
    """Standard dilute configuration with a nonzero-index gap (l0 = 2/3)."""
    return ChainParams(L=9.0, l=6.0, eps=0.1, delta=1e-4)


@pytest.fixture(scope="session")
def dilute_trivial():
    """Mirror configuration l0 = 1/3."""
    return ChainParams(L=9.0, l=3.0, eps=0.1, delta=1e-4)


@pytest.fixture(scope="session")
def unit_spheres():
    """Radius-one spheres at L = 9, l = 6, contrast 1/7000."""
    return ChainParams.unit_sphere(L=9.0, l=6.0, delta=1.0 / 7000.0)


@pytest.fixture
def report():
    def record(line: str):
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
