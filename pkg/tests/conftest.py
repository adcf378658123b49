import numpy as np
import pytest

from dbsnet.channel import Environment, build_link_matrix, make_dbs, make_mbs
from dbsnet.scenario import Region, User


@pytest.fixture
def env():
    return Environment()


@pytest.fixture
def region():
    return Region()


def random_instance(rng, n, m, region=Region(), theta_b=60.0, p_delay=0.2):
    """Users scattered around m DBSs so that footprints cover some of them."""
    dbs = np.column_stack([rng.uniform(50, 450, m), rng.uniform(50, 450, m), rng.uniform(60, 150, m)])
    owner = rng.integers(0, m, n)
    spread = dbs[owner, 2] * np.tan(np.radians(theta_b / 2)) * 1.3
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = spread * np.sqrt(rng.random(n))
    xy = np.clip(dbs[owner, :2] + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]), 0, 500)
    tau = (rng.random(n) < p_delay).astype(int)
    users = [User(i, tuple(p), int(t)) for i, (p, t) in enumerate(zip(xy, tau))]
    bss = [make_mbs(region.mbs_position)] + make_dbs(dbs, theta_b)
    return users, bss, build_link_matrix(users, bss)


# one PASS/FAIL line per acceptance criterion, printed after the run
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    n, title = marker.args
    detail = getattr(item, "criterion_detail", "")
    _CRITERIA[n] = (title, call.excinfo is None, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
