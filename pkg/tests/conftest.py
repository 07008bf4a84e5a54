import os
import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from frontspeed.fields import catalog_defs, sample_fields
from frontspeed.grid import CellSpec, build_grid

sys.path.insert(0, str(Path(__file__).parent))

np.seterr(all="raise", under="ignore")

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make(name="shear_sin", n=64, geometry="torus", **kw):
    d = 2 if geometry == "torus" else 1
    e = kw.pop("e", (1.0, 0.0) if d == 2 else (1.0,))
    grid = build_grid(CellSpec(d=d, nx=n, ny=n, geometry=geometry))
    return grid, sample_fields(grid, catalog_defs(name, e=e, **kw))


@pytest.fixture(scope="session")
def shear64():
    return make("shear_sin", 64)


@pytest.fixture(scope="session")
def cellular64():
    return make("cellular", 64)


@pytest.fixture(scope="session")
def zero32():
    return make("zero", 32)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def report_line():
    """Print one PASS/FAIL line per acceptance criterion and keep it for the summary."""
    def emit(label: str, passed: bool, detail: str, seconds: float):
        line = f"{'PASS' if passed else 'FAIL'}  {label}  ({seconds:.1f} s)  {detail}"
        ACCEPTANCE_LINES.append(line)
        print("\n" + line)
        return passed
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
