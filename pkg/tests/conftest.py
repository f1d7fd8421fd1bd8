"""Shared fixtures: meshes and eigenbases are expensive, so they are built
once per session and reused across test modules."""

import numpy as np
import pytest

from obslab import (RegionSpec, build_bolza, build_torus, eigensolve,
                    rasterize_region)

# Bolza ball regions are centered off the octagon's symmetry axes: at the
# center every rotation-symmetric eigenspace contains members vanishing to
# high angular order, which drives the worst-case region mass to zero for
# reasons that have nothing to do with observability on generic sets.
BOLZA_BALL_CENTER = (0.25, 0.15)

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_record():
    def rec(number: int, name: str, ok: bool, detail: str) -> bool:
        status = "PASS" if ok else "FAIL"
        _ACCEPTANCE_LINES.append(
            f"acceptance {number:02d} [{name}]: {status}  {detail}")
        return ok
    return rec


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


# ---------------------------------------------------------------------------
# torus meshes and bases

@pytest.fixture(scope="session")
def mesh16():
    return build_torus(16, 1.0)


@pytest.fixture(scope="session")
def basis16(mesh16):
    return eigensolve(mesh16, 16)


@pytest.fixture(scope="session")
def basis25(mesh16):
    return eigensolve(mesh16, 25)


@pytest.fixture(scope="session")
def strip16(mesh16):
    return rasterize_region(mesh16, RegionSpec.strip("x", 0.0, 0.3))


@pytest.fixture(scope="session")
def mesh32():
    return build_torus(32, 1.0)


@pytest.fixture(scope="session")
def basis32_100(mesh32):
    return eigensolve(mesh32, 100)


@pytest.fixture(scope="session")
def basis32_50(mesh32):
    return eigensolve(mesh32, 50)


@pytest.fixture(scope="session")
def strip32(mesh32):
    return rasterize_region(mesh32, RegionSpec.strip("x", 0.0, 0.3))


@pytest.fixture(scope="session")
def mesh64():
    return build_torus(64, 1.0)


@pytest.fixture(scope="session")
def basis64(mesh64):
    return eigensolve(mesh64, 64)


# ---------------------------------------------------------------------------
# octagon meshes and bases

@pytest.fixture(scope="session")
def bolza4():
    return build_bolza(4)


@pytest.fixture(scope="session")
def bolza4_100(bolza4):
    return eigensolve(bolza4, 100)


@pytest.fixture(scope="session")
def bolza4_64(bolza4):
    return eigensolve(bolza4, 64)


@pytest.fixture(scope="session")
def ball4(bolza4):
    return rasterize_region(bolza4, RegionSpec.ball(BOLZA_BALL_CENTER, 0.6))


@pytest.fixture(scope="session")
def bolza5():
    return build_bolza(5)


@pytest.fixture(scope="session")
def bolza5_100(bolza5):
    return eigensolve(bolza5, 100)


@pytest.fixture(scope="session")
def ball5(bolza5):
    return rasterize_region(bolza5, RegionSpec.ball(BOLZA_BALL_CENTER, 0.6))


# ---------------------------------------------------------------------------
# wave-scaling problem (largest build; only the wave tests pay for it)

@pytest.fixture(scope="session")
def wave_mesh():
    return build_torus(72, 1.0)


@pytest.fixture(scope="session")
def wave_basis(wave_mesh):
    # resolves the wave window at h = 2^-5: support (256, 4096) needs
    # lambda_N >= 4096 / 0.8 under the spillover guard
    return eigensolve(wave_mesh, 518)


@pytest.fixture(scope="session")
def wave_strip(wave_mesh):
    return rasterize_region(wave_mesh, RegionSpec.strip("x", 0.0, 0.3))
