"""Synthetic SNR telemetry with known rain truth.

A :class:`Trace` keeps the clean signal, the impairment offsets and the
scintillation draw apart, so rain can be injected into the clean part and
the measured stream is always rebuilt the same way: sum, then quantize.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from satrain.errors import ConfigError
from satrain.link_budget import CarrierParams, LinkNoiseParams, db_to_lin, lin_to_db, snr_dry, snr_wet
from satrain.rain_model import RainPathGeometry, total_attenuation_db

MINUTES_PER_DAY = 1440
DIURNAL_PERIOD_MIN = MINUTES_PER_DAY
QUANTUM_DB = 0.1


@dataclass(frozen=True)
class SnrSample:
    station_id: str
    k: int  # minutes since the Unix epoch
    esn0_db: float


@dataclass(frozen=True)
class DrySignalModel:
    mean_snr: float = 10.428  # dB
    diurnal_amplitude: float = 0.3  # dB
    diurnal_phase: float = 0.0  # rad
    scint_std: float = 0.139  # dB
    drift_db_per_day: float = 0.0

    def __post_init__(self):
        if self.scint_std < 0 or self.diurnal_amplitude < 0:
            raise ConfigError("scint_std and diurnal_amplitude must be >= 0")


@dataclass(frozen=True)
class SunTransit:
    start_k: int
    duration_min: int
    depth_db: float


@dataclass(frozen=True)
class GainStep:
    k: int
    delta_db: float


@dataclass(frozen=True)
class ImpairmentSchedule:
    sun_transits: tuple[SunTransit, ...] = ()
    gain_steps: tuple[GainStep, ...] = ()

    def __post_init__(self):
        windows = sorted((t.start_k, t.start_k + t.duration_min) for t in self.sun_transits)
        for (_, end), (start, _) in zip(windows, windows[1:]):
            if start < end:
                raise ConfigError("sun transit windows overlap")
        if len({g.k for g in self.gain_steps}) != len(self.gain_steps):
            raise ConfigError("two gain steps at the same sample")


@dataclass(frozen=True)
class RainEventSpec:
    start_k: int
    duration_min: int
    peak_rate: float  # mm/h
    shape: str = "trapezoid"
    ramp_fraction: float = 0.25
    second_peak_ratio: float = 0.6

    def __post_init__(self):
        if self.shape not in ("trapezoid", "double-peak"):
            raise ConfigError(f"unknown rain event shape {self.shape!r}")
        if self.peak_rate < 0 or self.duration_min <= 0:
            raise ConfigError("rain events need peak_rate >= 0 and duration > 0")
        if not 0 < self.ramp_fraction <= 0.5:
            raise ConfigError("ramp_fraction must lie in (0, 0.5]")

    @property
    def end_k(self) -> int:
        return self.start_k + self.duration_min

    def _lobes(self) -> list[tuple[float, float, float]]:
        """(offset_min, duration_min, peak) of each trapezoidal lobe."""
        if self.shape == "trapezoid":
            return [(0.0, float(self.duration_min), self.peak_rate)]
        half = self.duration_min / 2.0
        return [(0.0, half, self.peak_rate), (half, half, self.peak_rate * self.second_peak_ratio)]

    def rate_at(self, t_min) -> np.ndarray:
        """True rain rate at minutes ``t_min`` after the event start."""
        t = np.asarray(t_min, dtype=float)
        out = np.zeros_like(t)
        for off, dur, peak in self._lobes():
            ramp = self.ramp_fraction * dur
            u = t - off
            lobe = peak * np.clip(np.minimum(u, dur - u) / ramp, 0.0, 1.0)
            out = np.maximum(out, lobe)
        return out

    def analytic_depth_mm(self) -> float:
        """Closed-form rain depth of the event."""
        return sum(peak * (dur - self.ramp_fraction * dur) / 60.0 for _, dur, peak in self._lobes())


@dataclass(frozen=True)
class RainScenario:
    events: tuple[RainEventSpec, ...] = ()

    def __post_init__(self):
        spans = sorted((e.start_k, e.end_k) for e in self.events)
        for (_, end), (start, _) in zip(spans, spans[1:]):
            if start < end:
                raise ConfigError("rain events overlap")


@dataclass
class Trace:
    station_id: str
    k0: int
    clean_db: np.ndarray
    noise_db: np.ndarray
    offset_db: np.ndarray = None
    true_rate: np.ndarray = None
    true_l_rain_db: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.clean_db)
        if self.offset_db is None:
            self.offset_db = np.zeros(n)
        if self.true_rate is None:
            self.true_rate = np.zeros(n)
        if self.true_l_rain_db is None:
            self.true_l_rain_db = np.zeros(n)

    def __len__(self) -> int:
        return len(self.clean_db)

    @property
    def k(self) -> np.ndarray:
        return self.k0 + np.arange(len(self))

    @property
    def measured_db(self) -> np.ndarray:
        return quantize(self.clean_db + self.offset_db + self.noise_db)

    def samples(self) -> list[SnrSample]:
        return [SnrSample(self.station_id, int(k), float(z)) for k, z in zip(self.k, self.measured_db)]


def quantize(x_db, step: float = QUANTUM_DB) -> np.ndarray:
    return np.round(np.asarray(x_db) / step) * step


def station_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for station ``index`` of a run."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def gen_dry(model: DrySignalModel, n: int, seed: int, k0: int = 0, station_id: str = "SYN",
            rng: np.random.Generator | None = None) -> Trace:
    """Dry stream: mean + daily sinusoid + linear drift + white scintillation."""
    if n < 0:
        raise ConfigError("sample count must be >= 0")
    rng = station_rng(seed) if rng is None else rng
    k = np.arange(n, dtype=float)
    clean = (model.mean_snr
             + model.diurnal_amplitude * np.sin(2 * np.pi * (k0 + k) / DIURNAL_PERIOD_MIN + model.diurnal_phase)
             + model.drift_db_per_day * k / MINUTES_PER_DAY)
    noise = rng.normal(0.0, model.scint_std, n) if model.scint_std > 0 else np.zeros(n)
    return Trace(station_id, k0, clean, noise)


def inject_rain(trace: Trace, scenario: RainScenario, g: RainPathGeometry, p: LinkNoiseParams,
                c: CarrierParams, isotherm_at: Callable[[int], float] | None = None) -> Trace:
    """Push the scenario's true rain through the slant-path and SNR forward models.

    ``isotherm_at(k)`` supplies a time-varying 0 degC height; the geometry's
    own height is used otherwise. The clean SNR of every in-event sample is
    scaled by the wet/dry ratio of the link model, and the truth series are
    filled in.
    """
    clean = trace.clean_db.copy()
    rate = trace.true_rate.copy()
    l_db = trace.true_l_rain_db.copy()
    dry_lin = snr_dry(c, p)
    ks = trace.k
    for ev in scenario.events:
        lo = max(ev.start_k, trace.k0)
        hi = min(ev.end_k + 1, trace.k0 + len(trace))
        if lo >= hi:
            continue
        idx = np.arange(lo, hi) - trace.k0
        r = ev.rate_at(ks[idx] - ev.start_k)
        for i, ri in zip(idx, r):
            if ri <= 0:
                continue
            geom = g if isotherm_at is None else g.with_isotherm(isotherm_at(int(ks[i])))
            a_db = total_attenuation_db(float(ri), geom)
            ratio = snr_wet(c, p, db_to_lin(a_db)) / dry_lin
            clean[i] = trace.clean_db[i] + lin_to_db(ratio)
            rate[i] = ri
            l_db[i] = a_db
    return replace(trace, clean_db=clean, true_rate=rate, true_l_rain_db=l_db)


def apply_impairments(trace: Trace, sched: ImpairmentSchedule) -> Trace:
    """Add sun-transit V-notches and persistent transponder gain steps."""
    offset = trace.offset_db.copy()
    ks = trace.k
    for tr in sched.sun_transits:
        half = tr.duration_min / 2.0
        centre = tr.start_k + half
        inside = (ks >= tr.start_k) & (ks < tr.start_k + tr.duration_min)
        offset[inside] -= tr.depth_db * (1.0 - np.abs(ks[inside] - centre) / half)
    for step in sched.gain_steps:
        offset[ks >= step.k] += step.delta_db
    return replace(trace, offset_db=offset)


def truth_crossings(trace: Trace, xi: float, start_db: float, end_db: float) -> list[tuple[int, int]]:
    """(onset_k, offset_k) of each truth episode on the noiseless SNR drop.

    Onset is the first sample whose drop reaches ``start_db``; the episode
    ends at the first later sample whose drop is back at or below ``end_db``.
    """
    l_lin = 10.0 ** (trace.true_l_rain_db / 10.0)
    drop = 10.0 * np.log10((l_lin - xi) / (1.0 - xi))
    out = []
    i = 0
    n = len(drop)
    while i < n:
        if drop[i] >= start_db:
            j = i
            while j < n and drop[j] > end_db:
                j += 1
            out.append((int(trace.k0 + i), int(trace.k0 + j)))
            i = j
        i += 1
    return out


def periodogram_peak_period(x: Sequence[float], dt_min: float = 1.0) -> tuple[float, float]:
    """Period (min) of the strongest non-DC periodogram bin and the bin width in frequency."""
    x = np.asarray(x, dtype=float)
    spec = np.abs(np.fft.rfft(x - x.mean())) ** 2
    freqs = np.fft.rfftfreq(len(x), dt_min)
    i = int(np.argmax(spec[1:]) + 1)
    return 1.0 / freqs[i], freqs[1]


def default_rain_scenario(k0: int) -> RainScenario:
    """Three trapezoidal events (5, 20, 50 mm/h) inside a seven-day run."""
    day = MINUTES_PER_DAY
    return RainScenario((
        RainEventSpec(k0 + 1 * day + 8 * 60, 90, 5.0),
        RainEventSpec(k0 + 3 * day + 14 * 60, 120, 20.0),
        RainEventSpec(k0 + 5 * day + 3 * 60, 150, 50.0),
    ))

