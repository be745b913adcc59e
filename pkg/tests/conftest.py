"""Shared fixtures: kernels and solves are expensive, so build them once."""

import numpy as np
import pytest

import kclattice as kc

# one line per acceptance criterion, echoed after the run so the gate is
# visible even though pytest captures test stdout
acceptance_lines = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance gate")
        for line in acceptance_lines:
            terminalreporter.line(line)


@pytest.fixture(scope="session")
def kernel_m8():
    """Order-1 kernel covering radius-4 boxes."""
    return kc.build_kernel(1.0, 8)


@pytest.fixture(scope="session")
def kernel_m12():
    """Order-1 kernel covering radius-6 boxes (and radius-5 with margin)."""
    return kc.build_kernel(1.0, 12)


@pytest.fixture(scope="session")
def kernel_m16():
    """Order-1 kernel covering the radius-8 reference problem."""
    return kc.build_kernel(1.0, 16)


@pytest.fixture(scope="session")
def kernel_m20():
    """Order-1 kernel covering boxes up to radius 10."""
    return kc.build_kernel(1.0, 20)


@pytest.fixture(scope="session")
def reference_spec():
    """The coercive reference problem used across the solver tests."""
    return kc.ProblemSpec(
        kc.LatticeBox(8),
        kc.PotentialSpec.coercive(1.0, 1.0, 2.0),
        kc.PowerNonlinearity(1.0, 3.0),
        alpha=1.0,
        a=1.0,
        b=1.0,
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
