import json
import math
from pathlib import Path

import pytest

from ncgw.params import PhysicalParams

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def r0():
    """Reference regime with tau = 0 and the default kappa."""
    return PhysicalParams(m=1.0, g=1.0, hbar=1.0, theta=0.05, eta=0.1)


@pytest.fixture
def r0_run():
    """Reference regime as used by the CLI: tau = pi/(4 omega), kappa = hbar."""
    return PhysicalParams(m=1.0, g=1.0, hbar=1.0, theta=0.05, eta=0.1, tau=math.pi / 4 / 0.1, kappa=1.0)


@pytest.fixture
def r1():
    """Unit-frequency regime used for grid propagation."""
    return PhysicalParams(m=1.0, g=0.1, hbar=1.0, theta=0.05, eta=1.0, tau=math.pi / 4, kappa=1.0)


@pytest.fixture(scope="session")
def golden():
    return json.loads((FIXTURES / "golden.v1.json").read_text())["values"]


def pytest_terminal_summary(terminalreporter):
    rows = []
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid or rep.when != "call":
                continue
            name = nodeid.split("::test_criterion_")[1]
            num, _, label = name.partition("_")
            detail = dict(rep.user_properties).get("detail", "")
            rows.append((int(num), label, "PASS" if rep.passed else "FAIL", detail))
    if rows:
        terminalreporter.section("acceptance criteria")
        for num, label, verdict, detail in sorted(rows):
            terminalreporter.write_line(f"criterion {num:2d} {label:<28s} {verdict}  {detail}".rstrip())
