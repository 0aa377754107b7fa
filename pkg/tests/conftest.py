import pytest

from shotnoise import make_params


@pytest.fixture(scope="session")
def levy():
    return make_params(2, 4.0)


@pytest.fixture(scope="session")
def plane_gamma3():
    return make_params(2, 3.0)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one summary line per acceptance criterion."""

    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}; {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
