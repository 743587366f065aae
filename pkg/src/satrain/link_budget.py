"""Downlink SNR forward models and rain-attenuation extraction.

All ratio arithmetic is done on linear quantities; ``x_dB = 10 log10(x_lin)``
is applied only when values enter or leave the engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from satrain.errors import ConfigError, MeasurementError

BOLTZMANN = 1.380649e-23  # J/K
SPEED_OF_LIGHT = 299_792_458.0  # m/s


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x_lin: float) -> float:
    return 10.0 * math.log10(x_lin)


@dataclass(frozen=True)
class LinkNoiseParams:
    """Losses (linear, >= 1) and noise temperatures (K) of the receive chain."""

    atm_loss: float
    cloud_loss: float = 1.0
    t_cosmos: float = 2.78
    t_meteo: float = 275.0
    t_ground: float = 45.0
    t_receiver: float = 13.67

    def __post_init__(self):
        for name in ("t_cosmos", "t_meteo", "t_ground", "t_receiver"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite temperature >= 0 K, got {value}")
        if not self.atm_loss >= 1.0:
            raise ConfigError(f"atm_loss must be >= 1 (linear), got {self.atm_loss}")
        if not self.cloud_loss >= 1.0:
            raise ConfigError(f"cloud_loss must be >= 1 (linear), got {self.cloud_loss}")

    @classmethod
    def from_db(cls, atm_loss_db: float, cloud_loss_db: float = 0.0, **temps) -> "LinkNoiseParams":
        return cls(atm_loss=db_to_lin(atm_loss_db), cloud_loss=db_to_lin(cloud_loss_db), **temps)

    @property
    def total_loss(self) -> float:
        return self.atm_loss * self.cloud_loss

    @property
    def cloud_is_exact(self) -> bool:
        """False when a cloud loss makes the extraction formula approximate."""
        return self.cloud_loss == 1.0


@dataclass(frozen=True)
class CarrierParams:
    flux_density: float  # W/m^2
    rx_gain: float  # linear
    wavelength: float  # m
    symbol_rate: float  # 1/s
    boltzmann: float = BOLTZMANN

    def __post_init__(self):
        for name in ("flux_density", "rx_gain", "wavelength", "symbol_rate", "boltzmann"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be strictly positive, got {value}")

    @property
    def numerator(self) -> float:
        """Received energy term shared by the dry and wet SNR expressions."""
        return (self.flux_density * self.rx_gain * self.wavelength**2
                / (4.0 * math.pi * self.symbol_rate * self.boltzmann))


def compute_xi(p: LinkNoiseParams) -> float:
    """Link constant coupling the SNR ratio to the rain attenuation.

    Only the gaseous loss enters; see :attr:`LinkNoiseParams.cloud_is_exact`.
    """
    if not p.t_meteo >= p.t_cosmos:
        raise ConfigError("t_meteo must exceed t_cosmos")
    xi = (p.t_meteo - p.t_cosmos) / (p.atm_loss * (p.t_meteo + p.t_ground + p.t_receiver))
    return xi


def _system_temperature(p: LinkNoiseParams, l_rain: float) -> float:
    loss = p.total_loss * l_rain
    return loss * (p.t_cosmos / loss + p.t_meteo * (1.0 - 1.0 / loss) + p.t_ground + p.t_receiver)


def snr_dry(c: CarrierParams, p: LinkNoiseParams) -> float:
    """Clear-sky Es/N0 (linear)."""
    return c.numerator / _system_temperature(p, 1.0)


def snr_wet(c: CarrierParams, p: LinkNoiseParams, l_rain: float) -> float:
    """Es/N0 (linear) with an extra rain loss ``l_rain`` (linear, >= 1)."""
    if not l_rain >= 1.0:
        raise MeasurementError(f"rain loss must be >= 1 (linear), got {l_rain}")
    return c.numerator / _system_temperature(p, l_rain)


def extract_rain_attenuation(snr_dry_lin: float, snr_wet_lin: float, xi: float) -> float:
    """Rain loss (linear) from a dry reference SNR and a measured wet SNR.

    Both SNRs are linear ratios. The result is ``ratio * (1 - xi) + xi``, so
    it is exactly 1 when the two SNRs agree and may dip below 1 when the wet
    sample sits above the reference.
    """
    if not (math.isfinite(snr_wet_lin) and snr_wet_lin > 0):
        raise MeasurementError(f"wet SNR must be finite and > 0, got {snr_wet_lin}")
    if not (math.isfinite(snr_dry_lin) and snr_dry_lin > 0):
        raise MeasurementError(f"dry SNR must be finite and > 0, got {snr_dry_lin}")
    if not 0.0 < xi < 1.0:
        raise ConfigError(f"xi must lie in (0, 1), got {xi}")
    return (snr_dry_lin / snr_wet_lin) * (1.0 - xi) + xi


def snr_drop_for_loss(l_rain: float, xi: float) -> float:
    """Linear dry/wet SNR ratio produced by a rain loss ``l_rain``."""
    return (l_rain - xi) / (1.0 - xi)


def flux_for_snr(target_snr_db: float, c: CarrierParams, p: LinkNoiseParams) -> float:
    """Flux density giving ``target_snr_db`` of dry Es/N0 for the other parameters."""
    unit = CarrierParams(1.0, c.rx_gain, c.wavelength, c.symbol_rate, c.boltzmann)
    return db_to_lin(target_snr_db) / snr_dry(unit, p)


def wavelength_for(frequency_hz: float) -> float:
    return SPEED_OF_LIGHT / frequency_hz
