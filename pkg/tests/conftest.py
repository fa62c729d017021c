import numpy as np
import pytest
from hypothesis import settings

from quditgates.chain import TrapConfig, normal_modes
from quditgates.phases import default_basis
from quditgates.shaping import StabilizationConfig, build_coupling_matrices, optimize_pulse

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")

CHAIN_TRAP = TrapConfig(num_ions=10, axial_freq=400e3, radial_freq=3.7e6)
CHAIN_IONS = (3, 5)  # ions 4 and 6 counted from one
CHAIN_TAU = 500e-6
CHAIN_TONES = 512
CHAIN_CHI = np.pi / 8

STAB = {
    "none": StabilizationConfig(),
    "chi12": StabilizationConfig(5, ("12",), 1),
    "all": StabilizationConfig(5, ("11", "12", "22"), 1),
}

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def chain_setup():
    modes = normal_modes(CHAIN_TRAP)
    basis = default_basis(modes, CHAIN_TAU, CHAIN_TONES)
    mats = build_coupling_matrices(basis, modes, CHAIN_IONS, moment_order=1)
    return {"trap": CHAIN_TRAP, "modes": modes, "basis": basis, "mats": mats}


@pytest.fixture(scope="session")
def chain_results(chain_setup):
    s = chain_setup
    return {name: optimize_pulse(s["basis"], s["modes"], CHAIN_IONS, CHAIN_CHI, cfg,
                                 seed=0, mats=s["mats"])
            for name, cfg in STAB.items()}


SMALL_TRAP = TrapConfig(num_ions=2, axial_freq=200e3, radial_freq=1e6)


@pytest.fixture(scope="session")
def small_setup():
    modes = normal_modes(SMALL_TRAP)
    basis = default_basis(modes, 100e-6, 64)
    return {"trap": SMALL_TRAP, "modes": modes, "basis": basis}


SMALL_CHI = np.pi / 16


@pytest.fixture(scope="session")
def small_pulse(small_setup):
    s = small_setup
    return optimize_pulse(s["basis"], s["modes"], (0, 1), SMALL_CHI, seed=0, n_starts=4)
