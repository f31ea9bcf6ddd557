import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from semiflow import build_model

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_stable(dim, seed, abscissa=-0.1):
    return build_model({"type": "random-stable", "dimension": dim, "abscissa": abscissa, "seed": seed})


@pytest.fixture
def scalar():
    return build_model([[-1.0]])


@pytest.fixture
def diag2():
    return build_model(np.diag([-0.1, -2.0]))


@pytest.fixture
def ctmc2():
    return build_model({"type": "ctmc", "rates": [[-1.0, 1.0], [1.0, -1.0]]})


@pytest.fixture
def jordan2():
    return build_model({"type": "jordan", "eigenvalue": -0.1, "size": 2})


# --- acceptance summary: one line per criterion test


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    _ACCEPTANCE[props["criterion"]] = (props.get("title", ""), report.passed, props.get("detail", ""))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is not None and call.when == "setup":
        item.user_properties.append(("criterion", mark.args[0]))
        item.user_properties.append(("title", mark.args[1]))


def pytest_terminal_summary(terminalreporter, config):
    results = _ACCEPTANCE
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, ok, detail = results[n]
        line = f"criterion {n:2d}  {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
