"""Rain detection and rain-rate estimation from satellite downlink SNR telemetry."""

from satrain.link_budget import (
    CarrierParams,
    LinkNoiseParams,
    compute_xi,
    db_to_lin,
    extract_rain_attenuation,
    lin_to_db,
    snr_dry,
    snr_wet,
)
from satrain.rain_model import (
    PowerLawCoeffs,
    RainPathGeometry,
    invert_to_rain_rate,
    total_attenuation_db,
)

__version__ = "0.1.0"

__all__ = [
    "CarrierParams",
    "LinkNoiseParams",
    "PowerLawCoeffs",
    "RainPathGeometry",
    "compute_xi",
    "db_to_lin",
    "extract_rain_attenuation",
    "invert_to_rain_rate",
    "lin_to_db",
    "snr_dry",
    "snr_wet",
    "total_attenuation_db",
]
