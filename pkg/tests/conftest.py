import math

import pytest

from satrain.config import load_config
from satrain.link_budget import CarrierParams, LinkNoiseParams, wavelength_for
from satrain.rain_model import RainPathGeometry

FLUX_10_43_DB = 9.990342975242301e-13  # W/m^2, gives 10.43 dB clear-sky Es/N0


@pytest.fixture
def link():
    return LinkNoiseParams.from_db(0.09)


@pytest.fixture
def carrier():
    lam = wavelength_for(11.345e9)
    return CarrierParams(FLUX_10_43_DB, 0.65 * (math.pi * 0.75 / lam) ** 2, lam, 27.5e6)


@pytest.fixture
def geom():
    return RainPathGeometry.from_degrees(40.0, 3.0, 0.5)


@pytest.fixture
def make_config(tmp_path):
    """Engine config from INI text layered over the packaged defaults."""
    counter = iter(range(10_000))

    def make(text: str = ""):
        p = tmp_path / f"cfg{next(counter)}.ini"
        p.write_text(text)
        return load_config(p)

    return make


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
