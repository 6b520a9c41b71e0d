import numpy as np
import pytest

from shearlab.spectral import SpectralField2D

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record_criterion():
    def record(num: int, ok: bool, detail: str = "") -> None:
        ACCEPTANCE[num] = (bool(ok), detail)
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'} {detail}")

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pair(kx: int, ky: int, amp: complex, band: int | None = None) -> SpectralField2D:
    return SpectralField2D.from_modes({(kx, ky): amp, (-kx, -ky): np.conj(amp)}, band=band)


def sinx_cosy(band: int = 64) -> SpectralField2D:
    return SpectralField2D.from_modes(
        {(1, 1): -0.25j, (1, -1): -0.25j, (-1, -1): 0.25j, (-1, 1): 0.25j}, band=band)
