import numpy as np
import pytest

from metacast.field import DensityGrid, GridSpec

# PASS/FAIL lines collected by the acceptance tests, echoed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)


def analytic_grid(fn, box_min=(-1, -1, -1), box_max=(1, 1, 1), dims=33,
                  lengths=(0.1, 0.1, 0.1)) -> DensityGrid:
    """Density grid whose node values come from an analytic function of
    position, bypassing the KDE. Handy for fields with known structure."""
    spec = GridSpec(np.asarray(box_min, float), np.asarray(box_max, float),
                    np.full(3, dims, dtype=np.int64))
    X, Y, Z = np.meshgrid(*(spec.node_axis(k) for k in range(3)), indexing="ij")
    return DensityGrid(spec, fn(X, Y, Z), np.asarray(lengths, float))


def gaussian_bump(center, sigma=0.25, amplitude=1.0):
    cx, cy, cz = center

    def fn(X, Y, Z):
        r2 = (X - cx) ** 2 + (Y - cy) ** 2 + (Z - cz) ** 2
        return amplitude * np.exp(-r2 / (2.0 * sigma ** 2))

    return fn


@pytest.fixture(scope="session")
def radial_bump_grid():
    """Single smooth bump with its maximum at an off-node interior point."""
    return analytic_grid(gaussian_bump((0.11, -0.23, 0.05), sigma=0.3))


TWO_BUMP_CENTERS = ((-0.45, 0.0, 0.0), (0.45, 0.0, 0.0))
TWO_BUMP_SIGMA = 0.2
# Value of the two-bump field at the midpoint saddle.
TWO_BUMP_SADDLE = 2.0 * np.exp(-0.45 ** 2 / (2.0 * TWO_BUMP_SIGMA ** 2))


@pytest.fixture(scope="session")
def two_bump_grid():
    a = gaussian_bump(TWO_BUMP_CENTERS[0], sigma=TWO_BUMP_SIGMA)
    b = gaussian_bump(TWO_BUMP_CENTERS[1], sigma=TWO_BUMP_SIGMA)
    return analytic_grid(lambda X, Y, Z: a(X, Y, Z) + b(X, Y, Z))
