import pytest

from aparareal.sync import make_config


@pytest.fixture
def small_cfg():
    """Four slices on a coarse grid; quick enough for exhaustive checks."""
    return make_config(spot=25, strike=30, delta_T=0.1, n_slices=4, m=32)


@pytest.fixture(scope="session")
def table1_cfg():
    return make_config(spot=15, strike=20, delta_T=0.1, n_slices=16, m=250)


@pytest.fixture(scope="session")
def table3_cfg():
    return make_config(spot=25, strike=30, delta_T=0.1, n_slices=16, m=150)


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the summary is printed at the end of the run."""
    def record(ok, detail=""):
        _ACCEPTANCE.append((request.node.name, bool(ok), detail))
        assert ok, detail
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
