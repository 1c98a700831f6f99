import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fracbound import constants, pipeline
from fracbound.geometry import raster_from_predicate

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def square(h, side=1.0, origin=(0.0, 0.0)):
    x0, y0 = origin
    return raster_from_predicate(lambda X, Y: (X > x0) & (X < x0 + side) & (Y > y0) & (Y < y0 + side),
                                 (x0, y0, x0 + side, y0 + side), h)


def disk(h, radius=1.0):
    return raster_from_predicate(lambda X, Y: X**2 + Y**2 < radius**2, (-radius, -radius, radius, radius), h)


@pytest.fixture(scope="session")
def configured_table():
    """Fixed values for the three inexplicit constants; no corpus estimation."""
    return constants.load_table({"A_dir": 1.5, "M_pw": 1.0, "phi22": 0.5}, estimate=False)


@pytest.fixture(scope="session")
def estimated_table():
    return constants.load_table(estimate=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def families():
    return pipeline


# ---------------------------------------------------------------- acceptance summary

_CRITERIA = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call" and not (call.when == "setup" and call.excinfo):
        return
    n, title = mark.args
    status = "PASS" if call.excinfo is None else "XFAIL" if item.get_closest_marker("xfail") else "FAIL"
    # a criterion with several tests reports its worst outcome
    rank = {"PASS": 0, "XFAIL": 1, "FAIL": 2}
    prev = _CRITERIA.get(n, (title, "PASS"))[1]
    _CRITERIA[n] = (title, max(prev, status, key=rank.get))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2} {status:<5}  {title}")
