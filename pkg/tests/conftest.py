import json
import math
from importlib import resources

import numpy as np
import pytest

from biphoton_pbg.materials import Chi2Tensor, DispersionModel, Material, MaterialLibrary
from biphoton_pbg.spdc import PumpConfig, SchemeConfig, symmetric_signal_grid
from biphoton_pbg.stack import build_stack

PUMP_NM = 395.0


def constant_material(name, n, chi2=None, window=(0.1, 10.0)):
    return Material(name, DispersionModel.constant(n), chi2 or Chi2Tensor(), window)


@pytest.fixture(scope="session")
def library():
    return MaterialLibrary.load()


@pytest.fixture(scope="session")
def bragg_stack(library):
    spec = json.loads(resources.files("biphoton_pbg.data").joinpath("bragg_stack.json").read_text())
    return build_stack(spec, library)


@pytest.fixture(scope="session")
def cw_pump():
    return PumpConfig.from_wavelength(PUMP_NM)


@pytest.fixture(scope="session")
def scheme1_30(cw_pump):
    return SchemeConfig.preset("scheme1_all_p", cw_pump, math.radians(30))


@pytest.fixture(scope="session")
def scheme1_slice(bragg_stack, scheme1_30):
    from biphoton_pbg.spdc import jsa_cw

    grid = symmetric_signal_grid(scheme1_30.pump.omega_p, 0.2, 2001)
    return jsa_cw(bragg_stack, scheme1_30, grid)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def pytest_terminal_summary(terminalreporter):
    import sys

    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
