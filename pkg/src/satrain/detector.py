"""Rain start/stop state machine driven by the slow/fast tracker difference."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from satrain.errors import ConfigError, SatrainError
from satrain.link_budget import db_to_lin, extract_rain_attenuation, lin_to_db
from satrain.rain_model import RainPathGeometry, invert_to_rain_rate

DRY = "DRY"
RAINING = "RAINING"


@dataclass(frozen=True)
class DetectorConfig:
    start_threshold: float = 0.3  # dB
    end_threshold: float = 0.1  # dB
    min_event_samples: int = 2

    def __post_init__(self):
        if not self.start_threshold > self.end_threshold > 0:
            raise ConfigError("thresholds must satisfy start > end > 0")
        if self.min_event_samples < 1:
            raise ConfigError("min_event_samples must be >= 1")


@dataclass(frozen=True)
class DetectorState:
    phase: str = DRY
    frozen_dry_ref: float | None = None
    event_start_k: int | None = None
    consecutive_above: int = 0
    # (k, eta_st, eta_ft) of samples above the start threshold awaiting confirmation
    pending: tuple[tuple[int, float, float], ...] = ()

    def __post_init__(self):
        if (self.phase == RAINING) != (self.frozen_dry_ref is not None):
            raise ValueError("frozen_dry_ref must be set exactly when raining")

    @property
    def candidate_k(self) -> int | None:
        return self.pending[0][0] if self.pending else None

    def to_record(self) -> dict:
        return {
            "phase": self.phase,
            "frozen_dry_ref": self.frozen_dry_ref,
            "event_start_k": self.event_start_k,
            "consecutive_above": self.consecutive_above,
            "pending": [list(p) for p in self.pending],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "DetectorState":
        return cls(rec["phase"], rec["frozen_dry_ref"], rec["event_start_k"], rec["consecutive_above"],
                   tuple((int(k), float(a), float(b)) for k, a, b in rec["pending"]))


@dataclass(frozen=True)
class RateSample:
    k: int
    epsilon_db: float
    l_rain_linear: float
    rate: float  # mm/h, NaN when invalid
    valid: bool = True

    @property
    def l_rain_db(self) -> float:
        return lin_to_db(self.l_rain_linear) if self.l_rain_linear > 0 else math.nan


@dataclass(frozen=True)
class EventBoundary:
    kind: Literal["start", "end"]
    k: int
    frozen_dry_ref: float | None = None


@dataclass
class RainEvent:
    start_k: int
    frozen_dry_ref: float
    isotherm_height: float
    samples: list[RateSample] = field(default_factory=list)
    end_k: int | None = None

    @property
    def valid_samples(self) -> list[RateSample]:
        return [s for s in self.samples if s.valid]

    @property
    def peak_rate(self) -> float:
        rates = [s.rate for s in self.valid_samples]
        return max(rates) if rates else 0.0

    @property
    def cumulative_mm(self) -> float:
        """Trapezoidal integral of the valid rate series (minute grid, mm/h)."""
        valid = self.valid_samples
        if len(valid) < 2:
            return 0.0
        t_h = np.array([s.k for s in valid], dtype=float) / 60.0
        r = np.array([s.rate for s in valid])
        return float(np.trapezoid(r, t_h))

    @property
    def closed(self) -> bool:
        return self.end_k is not None


def rate_sample(k: int, eta_st: float, eta_ft: float, dry_ref: float, g: RainPathGeometry,
                xi: float) -> RateSample:
    """Rain loss and rate for one in-event sample against the frozen reference."""
    eps = eta_st - eta_ft
    try:
        l_lin = extract_rain_attenuation(db_to_lin(dry_ref), db_to_lin(eta_ft), xi)
        # the FT can sit above the frozen reference near event edges
        l_db = max(lin_to_db(l_lin), 0.0)
        return RateSample(k, eps, l_lin, invert_to_rain_rate(l_db, g))
    except (SatrainError, ValueError, OverflowError):
        return RateSample(k, eps, math.nan, math.nan, valid=False)


def detector_step(d: DetectorState, eta_st: float, eta_ft: float, g: RainPathGeometry, xi: float,
                  cfg: DetectorConfig, k: int) -> tuple[DetectorState, list[RateSample], EventBoundary | None]:
    """Advance the detector by one sample.

    Returns the new state, the rate samples that became final on this step
    (several at once when a debounced start is confirmed), and an event
    boundary if one occurred. A start boundary is dated at the first
    sample of the confirming run, and the frozen dry reference is the slow
    tracker output at that sample.
    """
    eps = eta_st - eta_ft
    if d.phase == DRY:
        if eps >= cfg.start_threshold:
            pending = d.pending + ((k, eta_st, eta_ft),)
            count = d.consecutive_above + 1
            if count < cfg.min_event_samples:
                return replace(d, consecutive_above=count, pending=pending), [], None
            k0, ref, _ = pending[0]
            rates = [rate_sample(pk, pst, pft, ref, g, xi) for pk, pst, pft in pending]
            new = DetectorState(RAINING, ref, k0, 0, ())
            return new, rates, EventBoundary("start", k0, ref)
        if d.consecutive_above or d.pending:
            return replace(d, consecutive_above=0, pending=()), [], None
        return d, [], None

    if eps <= cfg.end_threshold:
        return DetectorState(), [], EventBoundary("end", k)
    return d, [rate_sample(k, eta_st, eta_ft, d.frozen_dry_ref, g, xi)], None


def false_alarm_probability(eps_mean: float, eps_std: float, threshold: float) -> float:
    """Gaussian upper-tail probability of the dry tracker difference."""
    if not eps_std > 0:
        raise ValueError("eps_std must be > 0")
    return 0.5 * math.erfc((threshold - eps_mean) / (eps_std * math.sqrt(2.0)))
