"""Two-layer (melting layer + liquid layer) slant-path rain attenuation.

Vertical coordinate convention: ``h = 0`` at the 0 degC isotherm, increasing
downwards, so the ground station sits at ``h = isotherm_height``. The ice
layer above the isotherm contributes nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

from satrain.errors import ConfigError, InversionError
from satrain.link_budget import db_to_lin, extract_rain_attenuation, lin_to_db

MIN_ELEVATION = math.radians(5.0)
MAX_RATE = 500.0  # mm/h, upper bracket for inversion
INVERSION_TOL_DB = 1e-12


@dataclass(frozen=True)
class PowerLawCoeffs:
    """Specific attenuation ``k = alpha * R**beta`` in dB/km, R in mm/h."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError(f"power-law coefficients must be positive, got {self}")

    def specific(self, rate: float) -> float:
        return self.alpha * rate**self.beta


# Ku-band (11.345 GHz) defaults
LIQUID_LAYER = PowerLawCoeffs(alpha=0.0153, beta=1.2531)
MELTING_LAYER = PowerLawCoeffs(alpha=0.0914, beta=1.1068)


@dataclass(frozen=True)
class RainPathGeometry:
    elevation_angle: float  # rad
    isotherm_height: float  # km above the station
    melting_thickness: float = 0.5  # km
    ml_coeffs: PowerLawCoeffs = MELTING_LAYER
    ll_coeffs: PowerLawCoeffs = LIQUID_LAYER

    def __post_init__(self):
        if not 0.0 < self.elevation_angle < math.pi / 2:
            raise ConfigError(f"elevation angle must lie in (0, pi/2) rad, got {self.elevation_angle}")
        if not self.isotherm_height > 0:
            raise ConfigError(f"isotherm height must be > 0 km, got {self.isotherm_height}")
        if not 0.0 < self.melting_thickness <= self.isotherm_height:
            raise ConfigError(
                f"melting layer thickness {self.melting_thickness} km must lie in (0, h0={self.isotherm_height}]"
            )

    @classmethod
    def from_degrees(cls, elevation_deg: float, isotherm_height: float, melting_thickness: float = 0.5,
                     **coeffs) -> "RainPathGeometry":
        if not elevation_deg >= math.degrees(MIN_ELEVATION):
            raise ConfigError(f"elevation {elevation_deg} deg is below the 5 deg minimum")
        return cls(math.radians(elevation_deg), isotherm_height, melting_thickness, **coeffs)

    def with_isotherm(self, isotherm_height: float) -> "RainPathGeometry":
        return replace(self, isotherm_height=isotherm_height)


def rate_at_height(h: float, r_ll: float, g: RainPathGeometry) -> float:
    """Liquid rain rate at depth ``h`` km below the isotherm."""
    if not 0.0 <= h <= g.isotherm_height:
        raise ValueError(f"h={h} km outside [0, {g.isotherm_height}]")
    if h <= g.melting_thickness:
        return r_ll * h / g.melting_thickness
    return r_ll


def specific_attenuation(h: float, r_ll: float, g: RainPathGeometry) -> float:
    """dB/km along the path at depth ``h``; melting-layer law above its lower edge."""
    rate = rate_at_height(h, r_ll, g)
    if h <= g.melting_thickness:
        return g.ml_coeffs.specific(rate)
    return g.ll_coeffs.specific(rate)


def _check_rate(r_ll: float) -> None:
    if not (math.isfinite(r_ll) and r_ll >= 0):
        raise ValueError(f"rain rate must be finite and >= 0, got {r_ll}")


def equivalent_ml_thickness(g: RainPathGeometry) -> float:
    """Thickness of a uniform layer at the full rate, melting-layer law, same loss."""
    return g.melting_thickness / (g.ml_coeffs.beta + 1.0)


def ml_to_ll_scale(r_ll: float, g: RainPathGeometry) -> float:
    """``(a_ML/a_LL) (b_LL+1)/(b_ML+1) R**(b_ML-b_LL)``, the customary factor for
    restating the melting layer in liquid-layer coefficients.

    Multiplying the melting-layer thickness by this factor overstates the
    loss-matching thickness by ``b_LL + 1``; see :func:`ll_matched_thickness`.
    """
    ml, ll = g.ml_coeffs, g.ll_coeffs
    return (ml.alpha / ll.alpha) * (ll.beta + 1.0) / (ml.beta + 1.0) * r_ll ** (ml.beta - ll.beta)


def ll_equivalent_thickness(r_ll: float, g: RainPathGeometry) -> float:
    """Melting-layer thickness times :func:`ml_to_ll_scale` (km)."""
    return g.melting_thickness * ml_to_ll_scale(r_ll, g)


def ll_matched_thickness(r_ll: float, g: RainPathGeometry) -> float:
    """Liquid-layer-law thickness (km) whose loss equals the melting-layer loss at ``r_ll``."""
    ml, ll = g.ml_coeffs, g.ll_coeffs
    return equivalent_ml_thickness(g) * (ml.alpha / ll.alpha) * r_ll ** (ml.beta - ll.beta)


def ml_attenuation_db(r_ll: float, g: RainPathGeometry) -> float:
    _check_rate(r_ll)
    ml = g.ml_coeffs
    return ml.alpha * r_ll**ml.beta * g.melting_thickness / (math.sin(g.elevation_angle) * (ml.beta + 1.0))


def ll_attenuation_db(r_ll: float, g: RainPathGeometry) -> float:
    _check_rate(r_ll)
    ll = g.ll_coeffs
    return ll.alpha * r_ll**ll.beta * (g.isotherm_height - g.melting_thickness) / math.sin(g.elevation_angle)


def total_attenuation_db(r_ll: float, g: RainPathGeometry) -> float:
    """Slant-path rain loss in dB for ground rate ``r_ll`` mm/h."""
    return ml_attenuation_db(r_ll, g) + ll_attenuation_db(r_ll, g)


def invert_to_rain_rate(l_rain_db: float, g: RainPathGeometry, r_max: float = MAX_RATE) -> float:
    """Ground rain rate whose slant-path loss equals ``l_rain_db``.

    Bisection on ``[0, r_max]``; the loss is continuous and strictly
    increasing in the rate so the bracket always converges.
    """
    if not math.isfinite(l_rain_db):
        raise InversionError(f"attenuation must be finite, got {l_rain_db}")
    if l_rain_db < 0:
        raise InversionError(f"attenuation must be >= 0 dB, got {l_rain_db}")
    if l_rain_db == 0:
        return 0.0
    if total_attenuation_db(r_max, g) < l_rain_db:
        raise InversionError(f"{l_rain_db:.3f} dB exceeds the loss at {r_max} mm/h")

    lo, hi = 0.0, r_max
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        err = total_attenuation_db(mid, g) - l_rain_db
        if abs(err) <= INVERSION_TOL_DB:
            break
        if err < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * math.ulp(hi):
            break
    return mid


def rate_from_snr_drop(drop_db: float, g: RainPathGeometry, xi: float) -> float:
    """Rain rate for a dry-to-wet SNR drop (dB), via the extraction formula."""
    if drop_db < 0:
        raise InversionError(f"SNR drop must be >= 0 dB, got {drop_db}")
    l_rain = extract_rain_attenuation(db_to_lin(drop_db), 1.0, xi)
    return invert_to_rain_rate(lin_to_db(l_rain), g)


def characteristic_curve(g: RainPathGeometry, xi: float, snr_drop_grid: Iterable[float]) -> list[tuple[float, float]]:
    """Rows of ``(snr_drop_db, rate_mm_per_h)`` over the given drop grid."""
    rows = []
    for drop in snr_drop_grid:
        if not drop >= 0:
            raise InversionError(f"SNR drop grid values must be >= 0, got {drop}")
        rows.append((float(drop), rate_from_snr_drop(drop, g, xi)))
    return rows
