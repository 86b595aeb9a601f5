import numpy as np
import pytest

from sarscale.calibration import (AzimuthNoiseVector, CalibrationSet, RangeNoiseVector,
                                  SubswathRectangle)
from sarscale.fixtures import Geometry, make_calibration
from sarscale.noise_field import SceneRaster, build_noise_field

# lines printed at the end of the run by pytest_terminal_summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


SMALL = Geometry(rows=64, cols=160, n_blocks=2, jitter=1, burst_period=(8, 10, 8, 10, 8),
                 range_step=4, line_step=8, azimuth_step=2)
MEDIUM = Geometry(rows=240, cols=500)


def uniform_cal(rows, cols, range_value=1.0, gain=1.0, subswath="EW1", bursts=1):
    """One rectangle over the whole scene with constant tables."""
    rv = (RangeNoiseVector(0, (0, cols - 1), (range_value, range_value)),
          RangeNoiseVector(rows - 1, (0, cols - 1), (range_value, range_value)))
    av = (AzimuthNoiseVector(subswath, 0, rows - 1, 0, cols - 1, (0, rows - 1), (gain, gain)),)
    rect = (SubswathRectangle(subswath, 0, rows - 1, 0, cols - 1),)
    return CalibrationSet(rv, av, rect, {subswath: bursts}, rows, cols)


def banded_cal(rows, widths, levels=None, bursts=None):
    """Subswaths side by side over all rows, flat range tables per subswath."""
    names = ("EW1", "EW2", "EW3", "EW4", "EW5")[:len(widths)]
    levels = levels or [1.0] * len(widths)
    edges = np.cumsum((0,) + tuple(widths))
    cols = int(edges[-1])
    rects, avs, pixels, values = [], [], [], []
    for a, name in enumerate(names):
        c0, c1 = int(edges[a]), int(edges[a + 1]) - 1
        rects.append(SubswathRectangle(name, 0, rows - 1, c0, c1))
        avs.append(AzimuthNoiseVector(name, 0, rows - 1, c0, c1, (0, rows - 1), (1.0, 1.0)))
        pixels += [c0, c1] if c1 > c0 else [c0]
        values += [levels[a]] * (2 if c1 > c0 else 1)
    rv = tuple(RangeNoiseVector(line, tuple(pixels), tuple(values)) for line in (0, rows - 1))
    bursts = bursts or {n: 1 for n in names}
    return CalibrationSet(rv, tuple(avs), tuple(rects), bursts, rows, cols)


@pytest.fixture(scope="session")
def small_cal():
    return make_calibration(SMALL, seed=3)


@pytest.fixture(scope="session")
def small_field(small_cal):
    return build_noise_field(small_cal)


@pytest.fixture(scope="session")
def medium_cal():
    return make_calibration(MEDIUM, seed=11)


@pytest.fixture(scope="session")
def medium_field(medium_cal):
    return build_noise_field(medium_cal)


def pure_noise(field, c=1.0):
    return SceneRaster(c * field.values.copy(), field.valid.copy())
