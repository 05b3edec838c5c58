import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dopedppln.dispersion import default_catalog  # noqa: E402
from dopedppln.phasematch import TYPE2, CrystalSpec  # noqa: E402


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def mgln(catalog):
    return catalog["MgLN"]


@pytest.fixture(scope="session")
def mgln5(mgln):
    return CrystalSpec(mgln, 5.0, 24.5)


@pytest.fixture(scope="session")
def type2():
    return TYPE2


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line)
