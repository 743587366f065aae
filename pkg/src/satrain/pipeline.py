"""Multi-station processing: ingestion, forecast lookup, per-station trackers
and detector, sun-transit masking and cross-station gain-step handling.

Stations are advanced in lockstep over the union of their sample indices.
Each output record stays in a short buffer until it can no longer change:
a pending detector candidate may still be confirmed (records gain rain
rates), and a common fade found within the look-back window rewinds every
station to just before the window, re-baselines the trackers and replays
the window with event starts suppressed.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import statistics
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

from satrain.detector import (
    DRY,
    RAINING,
    DetectorConfig,
    DetectorState,
    RainEvent,
    RateSample,
    detector_step,
)
from satrain.errors import ConfigError, DataError, ForecastError, StaleForecastError
from satrain.link_budget import LinkNoiseParams, compute_xi
from satrain.rain_model import LIQUID_LAYER, MELTING_LAYER, PowerLawCoeffs, RainPathGeometry
from satrain.synth import SnrSample
from satrain.timeutil import format_timestamp, from_sample_index, parse_timestamp, to_sample_index
from satrain.trackers import (
    FAST_TRACKER,
    SLOW_TRACKER,
    TrackerConfig,
    TrackerState,
    kf_freeze,
    kf_init,
    kf_predict_only,
    kf_shift,
    kf_step,
    kf_unfreeze,
)

log = logging.getLogger(__name__)

OK = "ok"
MASKED = "masked"
DEGRADED = "degraded"
BAD = "bad"
GLOBAL_FADE = "global_fade"
INVALID = "invalid"

LOCAL = "LOCAL"
GLOBAL = "GLOBAL"

FORECAST_MAX_AGE_S = 12 * 3600
H0_BAND_KM = (0.5, 6.0)


# ---------------------------------------------------------------- domain types


@dataclass(frozen=True)
class StationRecord:
    station_id: str
    latitude: float
    longitude: float
    elevation_deg: float
    melting_thickness_km: float = 0.5
    default_h0_km: float = 3.0

    def __post_init__(self):
        if not self.station_id:
            raise ConfigError("station_id must be non-empty")
        if not 5.0 < self.elevation_deg < 90.0:
            raise ConfigError(f"{self.station_id}: elevation {self.elevation_deg} deg outside (5, 90)")
        if not -90.0 <= self.latitude <= 90.0 or not -180.0 <= self.longitude <= 360.0:
            raise ConfigError(f"{self.station_id}: bad coordinates")
        if not self.melting_thickness_km > 0 or not self.default_h0_km >= self.melting_thickness_km:
            raise ConfigError(f"{self.station_id}: need 0 < melting thickness <= default h0")

    def geometry(self, h0_km: float, ml: PowerLawCoeffs = MELTING_LAYER,
                 ll: PowerLawCoeffs = LIQUID_LAYER) -> RainPathGeometry:
        # a forecast isotherm below the melting layer leaves only the layer itself
        h0 = max(h0_km, self.melting_thickness_km)
        return RainPathGeometry(math.radians(self.elevation_deg), h0, self.melting_thickness_km, ml, ll)


@dataclass(frozen=True)
class IsothermForecast:
    times_s: tuple[int, ...]
    h0_km: tuple[float, ...]

    def __post_init__(self):
        if len(self.times_s) != len(self.h0_km):
            raise ConfigError("forecast times and values differ in length")
        if any(b <= a for a, b in zip(self.times_s, self.times_s[1:])):
            raise ConfigError("forecast times must be strictly increasing")
        lo, hi = H0_BAND_KM
        bad = [h for h in self.h0_km if not lo <= h <= hi]
        if bad:
            raise ConfigError(f"isotherm heights outside [{lo}, {hi}] km: {bad[:3]}")


@dataclass(frozen=True)
class TransitWindow:
    station_id: str
    start_s: int
    duration_s: int
    depth_db: float = 0.0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ConfigError("sun transit duration must be > 0")

    def covers(self, t_s: int) -> bool:
        return self.start_s <= t_s < self.start_s + self.duration_s


@dataclass(frozen=True)
class GlobalFadePolicy:
    window: int = 3  # samples
    station_fraction: float = 0.8
    step_depth: float = 0.3  # dB

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("global fade window must be >= 1 sample")
        if not 0.5 < self.station_fraction <= 1.0:
            raise ConfigError("station_fraction must lie in (0.5, 1]")
        if not self.step_depth > 0:
            raise ConfigError("step_depth must be > 0")


@dataclass(frozen=True)
class PipelineConfig:
    link: LinkNoiseParams = field(default_factory=lambda: LinkNoiseParams.from_db(0.09))
    slow: TrackerConfig = SLOW_TRACKER
    fast: TrackerConfig = FAST_TRACKER
    detector: DetectorConfig = DetectorConfig()
    global_fade: GlobalFadePolicy = GlobalFadePolicy()
    ml_coeffs: PowerLawCoeffs = MELTING_LAYER
    ll_coeffs: PowerLawCoeffs = LIQUID_LAYER
    forecast_max_age_s: int = FORECAST_MAX_AGE_S
    mask_sun_transits: bool = True

    @property
    def xi(self) -> float:
        return compute_xi(self.link)


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    station_id: str | None = None
    line: int | None = None
    k: int | None = None


@dataclass(frozen=True)
class OutputRecord:
    station_id: str
    k: int
    epsilon_db: float
    rain_flag: bool
    l_rain_db: float | None
    rate_mm_per_h: float | None
    quality: str

    @property
    def t_s(self) -> int:
        return from_sample_index(self.k)


@dataclass(frozen=True)
class GlobalFadeEvent:
    k: int
    step_db: float
    n_dropped: int
    n_reporting: int


# ------------------------------------------------------------------ file input


def _numeric(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"esn0_db must be a number, got {value!r}")
    return float(value)


@dataclass
class IngestResult:
    series: dict[str, list[SnrSample]]
    diagnostics: list[Diagnostic]

    def count(self, kind: str) -> int:
        return sum(d.kind == kind for d in self.diagnostics)


def ingest(lines: Iterable[str], known_stations: Iterable[str] | None = None) -> IngestResult:
    """Parse newline-delimited telemetry into per-station ordered samples.

    Each line is a JSON object with ``station_id``, ``timestamp`` and
    ``esn0_db``. Malformed lines, unknown stations and out-of-order or
    duplicate timestamps are skipped with a diagnostic. Gaps are kept.
    """
    known = None if known_stations is None else set(known_stations)
    series: dict[str, list[SnrSample]] = {}
    diags: list[Diagnostic] = []
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            sid = str(rec["station_id"])
            k = to_sample_index(parse_timestamp(rec["timestamp"]))
            z = _numeric(rec["esn0_db"])
        except (ValueError, KeyError, TypeError) as exc:
            diags.append(Diagnostic("malformed", f"line {n}: {exc}", line=n))
            continue
        if known is not None and sid not in known:
            diags.append(Diagnostic("unknown_station", f"line {n}: unknown station {sid!r}", sid, n, k))
            continue
        seq = series.setdefault(sid, [])
        if seq and k <= seq[-1].k:
            kind = "duplicate" if k == seq[-1].k else "out_of_order"
            diags.append(Diagnostic(kind, f"line {n}: {kind} timestamp for {sid}", sid, n, k))
            continue
        seq.append(SnrSample(sid, k, z))
    return IngestResult(series, diags)


def _csv_rows(path) -> Iterator[tuple[int, dict]]:
    with open(path, newline="") as fh:
        rows = (r for r in fh if r.strip() and not r.lstrip().startswith("#"))
        reader = csv.DictReader(rows, skipinitialspace=True)
        for n, row in enumerate(reader, start=2):
            yield n, {(k or "").strip(): (v or "").strip() for k, v in row.items()}


def load_stations(path) -> dict[str, StationRecord]:
    out: dict[str, StationRecord] = {}
    try:
        for n, row in _csv_rows(path):
            opt = {}
            if row.get("melting_thickness_km"):
                opt["melting_thickness_km"] = float(row["melting_thickness_km"])
            if row.get("default_h0_km"):
                opt["default_h0_km"] = float(row["default_h0_km"])
            st = StationRecord(row["station_id"], float(row["latitude"]), float(row["longitude"]),
                               float(row["elevation_deg"]), **opt)
            if st.station_id in out:
                raise ConfigError(f"{path}:{n}: duplicate station {st.station_id}")
            out[st.station_id] = st
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: bad station registry ({exc})") from exc
    return out


def load_forecast(path) -> IsothermForecast:
    times, vals = [], []
    try:
        for _, row in _csv_rows(path):
            times.append(parse_timestamp(row["valid_time"]))
            vals.append(float(row["h0_km"]))
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: bad forecast file ({exc})") from exc
    return IsothermForecast(tuple(times), tuple(vals))


def load_transits(path) -> list[TransitWindow]:
    out = []
    try:
        for _, row in _csv_rows(path):
            out.append(TransitWindow(row["station_id"], parse_timestamp(row["start"]),
                                     int(round(float(row["duration_s"]))), float(row.get("depth_db") or 0.0)))
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: bad transit schedule ({exc})") from exc
    return out


# -------------------------------------------------------------------- lookups


def lookup_h0(f: IsothermForecast, t_s: int, max_age_s: int = FORECAST_MAX_AGE_S) -> float:
    """Step-hold value of the latest forecast at or before ``t_s``."""
    if not f.times_s or t_s < f.times_s[0]:
        raise ForecastError(f"no isotherm forecast at or before {format_timestamp(t_s)}")
    lo, hi = 0, len(f.times_s)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if f.times_s[mid] <= t_s:
            lo = mid
        else:
            hi = mid
    age = t_s - f.times_s[lo]
    if age > max_age_s:
        raise StaleForecastError(f"forecast is {age / 3600:.1f} h old", f.h0_km[lo], age)
    return f.h0_km[lo]


def global_fade_check(drops: Mapping[str, float], policy: GlobalFadePolicy) -> str:
    """Classify one time-aligned set of per-station level drops (dB).

    ``drops`` holds one entry per station reporting a full window.
    """
    if len(drops) < 2:
        return LOCAL
    n_drop = sum(d >= policy.step_depth for d in drops.values())
    return GLOBAL if n_drop >= policy.station_fraction * len(drops) - 1e-12 else LOCAL


# ------------------------------------------------------------ station runtime


@dataclass(frozen=True)
class _OpenEvent:
    start_k: int
    frozen_dry_ref: float
    h0: float
    quality: str
    samples: tuple[RateSample, ...] = ()

    def to_event(self, end_k: int | None) -> RainEvent:
        return RainEvent(self.start_k, self.frozen_dry_ref, self.h0, list(self.samples), end_k)


@dataclass(frozen=True)
class ClosedEvent:
    station_id: str
    event: RainEvent
    quality: str


@dataclass
class _Station:
    """Mutable per-station runtime; every field holds an immutable value so a
    shallow copy is a full snapshot."""

    rec: StationRecord
    st: TrackerState | None = None
    ft: TrackerState | None = None
    det: DetectorState = DetectorState()
    st_at_candidate: TrackerState | None = None
    cand_h0: float | None = None
    cand_quality: str = OK
    event: _OpenEvent | None = None
    held: OutputRecord | None = None  # last emitted values, reused while masked
    last_k: int | None = None

    def snapshot(self) -> "_Station":
        return copy.copy(self)


def _rate_record(sid: str, s: RateSample, quality: str) -> OutputRecord:
    if not s.valid:
        return OutputRecord(sid, s.k, s.epsilon_db, True, None, None, INVALID)
    return OutputRecord(sid, s.k, s.epsilon_db, True, s.l_rain_db, s.rate, quality)


class Pipeline:
    """Lockstep engine over a set of stations.

    Feed samples in non-decreasing ``k`` with :meth:`feed`; finalized
    records accumulate in :attr:`records` and closed events in
    :attr:`events`. :meth:`finish` flushes the buffers.
    """

    def __init__(self, stations: Mapping[str, StationRecord], cfg: PipelineConfig = PipelineConfig(),
                 forecast: IsothermForecast | None = None, transits: Sequence[TransitWindow] = ()):
        self.cfg = cfg
        self.xi = cfg.xi
        self.forecast = forecast
        self.transits: dict[str, list[TransitWindow]] = {}
        for tw in transits:
            if tw.station_id in stations:
                self.transits.setdefault(tw.station_id, []).append(tw)
        self.stations = {sid: _Station(rec) for sid, rec in sorted(stations.items())}
        self.buffers: dict[str, list[OutputRecord]] = {sid: [] for sid in self.stations}
        self.history: dict[str, deque] = {sid: deque() for sid in self.stations}
        self.pending_events: dict[str, list[ClosedEvent]] = {sid: [] for sid in self.stations}
        self.records: list[OutputRecord] = []
        self.events: list[ClosedEvent] = []
        self.diagnostics: list[Diagnostic] = []
        self.global_fades: list[GlobalFadeEvent] = []
        self.k_now: int | None = None

    # -- helpers

    def _geometry(self, stn: _Station, h0: float) -> RainPathGeometry:
        return stn.rec.geometry(h0, self.cfg.ml_coeffs, self.cfg.ll_coeffs)

    def _h0(self, stn: _Station, k: int) -> tuple[float, str]:
        if self.forecast is None:
            return stn.rec.default_h0_km, DEGRADED
        t = from_sample_index(k)
        try:
            return lookup_h0(self.forecast, t, self.cfg.forecast_max_age_s), OK
        except StaleForecastError as exc:
            self.diagnostics.append(Diagnostic("stale_forecast", str(exc), stn.rec.station_id, k=k))
            return exc.value, DEGRADED
        except ForecastError as exc:
            self.diagnostics.append(Diagnostic("no_forecast", str(exc), stn.rec.station_id, k=k))
            return stn.rec.default_h0_km, DEGRADED

    def _masked(self, sid: str, k: int) -> bool:
        if not self.cfg.mask_sun_transits:
            return False
        t = from_sample_index(k)
        return any(tw.covers(t) for tw in self.transits.get(sid, ()))

    def _emit(self, sid: str, rec: OutputRecord) -> None:
        self.buffers[sid].append(rec)
        self.stations[sid].held = rec

    def _rewrite(self, sid: str, recs: Iterable[OutputRecord]) -> None:
        by_k = {r.k: r for r in recs}
        buf = self.buffers[sid]
        for i, old in enumerate(buf):
            if old.k in by_k:
                buf[i] = by_k.pop(old.k)
        if by_k:  # samples already finalized cannot change; should not happen
            raise RuntimeError(f"{sid}: rewrite of finalized samples {sorted(by_k)}")

    # -- one station, one sample

    def _advance(self, sid: str, k: int, z: float, allow_start: bool = True) -> None:
        stn = self.stations[sid]
        cfg = self.cfg
        masked = self._masked(sid, k)

        if stn.ft is None:
            if masked or not math.isfinite(z):
                self._emit(sid, OutputRecord(sid, k, 0.0, False, None, 0.0, MASKED if masked else BAD))
                return
            stn.st, stn.ft = kf_init(z, cfg.slow, k), kf_init(z, cfg.fast, k)
            stn.last_k = k
            self._emit(sid, OutputRecord(sid, k, 0.0, False, None, 0.0, OK))
            return

        # gaps are bridged by predict-only steps
        for kk in range(stn.last_k + 1, k):
            stn.st = kf_predict_only(stn.st, cfg.slow, kk)
            stn.ft = kf_predict_only(stn.ft, cfg.fast, kk)
        stn.last_k = k

        if masked or not math.isfinite(z):
            # hold every state at its last value; detection is deferred
            stn.st, stn.ft = replace(stn.st, last_k=k), replace(stn.ft, last_k=k)
            h = stn.held
            flag = MASKED if masked else BAD
            if h is None:
                self._emit(sid, OutputRecord(sid, k, 0.0, False, None, 0.0, flag))
            else:
                self._emit(sid, replace(h, k=k, quality=flag))
            return

        stn.st = kf_step(stn.st, z, cfg.slow, k)
        stn.ft = kf_step(stn.ft, z, cfg.fast, k)
        eps = stn.st.level - stn.ft.level

        if stn.det.phase == DRY and not allow_start:
            stn.det, stn.st_at_candidate = DetectorState(), None
            self._emit(sid, OutputRecord(sid, k, eps, False, None, 0.0, GLOBAL_FADE))
            return

        if stn.det.phase == DRY and not stn.det.pending and eps >= cfg.detector.start_threshold:
            stn.st_at_candidate = stn.st
            stn.cand_h0, stn.cand_quality = self._h0(stn, k)

        if stn.det.phase == RAINING:
            h0 = stn.event.h0
        else:
            h0 = stn.cand_h0 if stn.cand_h0 is not None else stn.rec.default_h0_km
        g = self._geometry(stn, h0)
        det, rates, boundary = detector_step(stn.det, stn.st.level, stn.ft.level, g, self.xi, cfg.detector, k)
        stn.det = det

        if boundary is not None and boundary.kind == "start":
            stn.st = replace(kf_freeze(stn.st_at_candidate), last_k=k)
            stn.event = _OpenEvent(boundary.k, boundary.frozen_dry_ref, h0, stn.cand_quality, tuple(rates))
            recs = [_rate_record(sid, s, stn.cand_quality) for s in rates]
            self._rewrite(sid, [r for r in recs if r.k != k])
            self._emit(sid, recs[-1])
            stn.st_at_candidate, stn.cand_h0 = None, None
        elif boundary is not None:
            stn.st = kf_unfreeze(stn.st)
            self.pending_events[sid].append(ClosedEvent(sid, stn.event.to_event(k), stn.event.quality))
            stn.event = None
            self._emit(sid, OutputRecord(sid, k, eps, False, None, 0.0, OK))
        elif det.phase == RAINING:
            s = rates[0]
            stn.event = replace(stn.event, samples=stn.event.samples + (s,))
            self._emit(sid, _rate_record(sid, s, stn.event.quality))
        else:
            if not det.pending:
                stn.st_at_candidate, stn.cand_h0 = None, None
            self._emit(sid, OutputRecord(sid, k, eps, False, None, 0.0, OK))

    # -- cross-station logic

    def _level_drops(self, k: int) -> dict[str, tuple[float, float]]:
        w = self.cfg.global_fade.window
        drops = {}
        for sid, hist in self.history.items():
            if len(hist) < w:
                continue
            win = list(hist)[-w:]
            if win[-1][0] != k or win[0][0] != k - w + 1:
                continue
            if any(self._masked(sid, kk) or not math.isfinite(z) for kk, z, _ in win):
                continue
            before = win[0][2].ft
            if before is None:
                continue
            drops[sid] = (before.level - statistics.median(z for _, z, _ in win), before.level - win[-1][1])
        return drops

    def _rebaseline(self, k: int, drops: Mapping[str, tuple[float, float]]) -> None:
        # classification uses the window median; the step size uses the newest
        # sample, which is past the step, pooled over the dropping stations
        pol = self.cfg.global_fade
        dropped = [last for med, last in drops.values() if med >= pol.step_depth]
        step = statistics.median(dropped)
        self.global_fades.append(GlobalFadeEvent(k, -step, len(dropped), len(drops)))
        self.diagnostics.append(Diagnostic("global_fade", f"common step {-step:+.3f} dB on "
                                           f"{len(dropped)}/{len(drops)} stations", k=k))
        first = k - pol.window + 1
        for sid, stn in self.stations.items():
            hist = self.history[sid]
            replay = [(kk, z) for kk, z, _ in hist if kk >= first]
            if replay:
                restored = next(snap for kk, _, snap in hist if kk >= first)
                self.stations[sid] = stn = restored.snapshot()
                while hist and hist[-1][0] >= first:
                    hist.pop()
                self.buffers[sid] = [r for r in self.buffers[sid] if r.k < first]
                self.pending_events[sid] = [e for e in self.pending_events[sid] if e.event.end_k < first]
            self._shift_station(stn, -step)
            for kk, z in replay:
                hist.append((kk, z, stn.snapshot()))
                self._advance(sid, kk, z, allow_start=False)
                stn = self.stations[sid]

    @staticmethod
    def _shift_station(stn: _Station, delta: float) -> None:
        if stn.st is not None:
            stn.st = kf_shift(stn.st, delta)
            stn.ft = kf_shift(stn.ft, delta)
        if stn.st_at_candidate is not None:
            stn.st_at_candidate = kf_shift(stn.st_at_candidate, delta)
        if stn.event is not None:
            stn.event = replace(stn.event, frozen_dry_ref=stn.event.frozen_dry_ref + delta)
            stn.det = replace(stn.det, frozen_dry_ref=stn.det.frozen_dry_ref + delta)
        if stn.det.pending:
            stn.det = replace(stn.det, pending=tuple((pk, a + delta, b + delta) for pk, a, b in stn.det.pending))

    # -- driving

    def feed(self, k: int, samples: Mapping[str, float]) -> None:
        """Advance every station that has a sample at index ``k``."""
        if self.k_now is not None and k <= self.k_now:
            raise DataError(f"sample index {k} is not after {self.k_now}")
        self.k_now = k
        multi = len(self.stations) >= 2
        w = self.cfg.global_fade.window
        for sid in sorted(samples):
            if sid not in self.stations:
                continue
            if multi:
                hist = self.history[sid]
                hist.append((k, float(samples[sid]), self.stations[sid].snapshot()))
                while len(hist) > w + 1:
                    hist.popleft()
            self._advance(sid, k, float(samples[sid]))
        if multi:
            drops = self._level_drops(k)
            if global_fade_check({sid: d[0] for sid, d in drops.items()}, self.cfg.global_fade) == GLOBAL:
                self._rebaseline(k, drops)
        self._finalize(k - w)

    def _finalize(self, horizon: int) -> None:
        for sid, stn in self.stations.items():
            limit = horizon
            if stn.det.pending:
                limit = min(limit, stn.det.pending[0][0] - 1)
            buf = self.buffers[sid]
            n = 0
            while n < len(buf) and buf[n].k <= limit:
                n += 1
            if n:
                self.records.extend(buf[:n])
                del buf[:n]
            keep = []
            for ev in self.pending_events[sid]:
                (self.events if ev.event.end_k <= horizon else keep).append(ev)
            self.pending_events[sid] = keep

    def finish(self) -> None:
        """Flush all buffers; open events are reported with no end."""
        for sid, stn in self.stations.items():
            self.records.extend(self.buffers[sid])
            self.buffers[sid] = []
            self.events.extend(self.pending_events[sid])
            self.pending_events[sid] = []
            if stn.event is not None:
                self.events.append(ClosedEvent(sid, stn.event.to_event(None), stn.event.quality))
        self.records.sort(key=lambda r: (r.station_id, r.k))
        self.events.sort(key=lambda e: (e.station_id, e.event.start_k))

    def run(self, series: Mapping[str, Sequence[SnrSample]], until_k: int | None = None) -> None:
        """Feed the samples of ``series`` with ``k`` after the current position
        and, if given, before ``until_k``."""
        by_k: dict[int, dict[str, float]] = {}
        for sid, seq in series.items():
            if sid not in self.stations:
                continue
            for s in seq:
                if (self.k_now is None or s.k > self.k_now) and (until_k is None or s.k < until_k):
                    by_k.setdefault(s.k, {})[sid] = s.esn0_db
        for k in sorted(by_k):
            self.feed(k, by_k[k])

    # -- checkpointing

    def checkpoint(self) -> dict:
        """JSON-safe snapshot of every state needed to resume."""
        return {
            "k_now": self.k_now,
            "stations": {sid: _station_to_record(stn) for sid, stn in self.stations.items()},
            "buffers": {sid: [_record_to_list(r) for r in buf] for sid, buf in self.buffers.items()},
            "history": {sid: [[kk, z, _station_to_record(s)] for kk, z, s in h] for sid, h in self.history.items()},
            "pending_events": {sid: [_closed_to_record(e) for e in evs] for sid, evs in self.pending_events.items()},
        }

    def restore(self, ck: dict) -> None:
        """Load a :meth:`checkpoint` into a freshly built pipeline."""
        if set(ck["stations"]) != set(self.stations):
            raise ConfigError("checkpoint was taken with a different station set")
        self.k_now = ck["k_now"]
        for sid in self.stations:
            rec = self.stations[sid].rec
            self.stations[sid] = _station_from_record(rec, ck["stations"][sid])
            self.buffers[sid] = [_record_from_list(sid, r) for r in ck["buffers"][sid]]
            self.history[sid] = deque((kk, z, _station_from_record(rec, s)) for kk, z, s in ck["history"][sid])
            self.pending_events[sid] = [_closed_from_record(sid, e) for e in ck["pending_events"][sid]]


# ---------------------------------------------------------- (de)serialization


def _rate_to_list(s: RateSample) -> list:
    return [s.k, s.epsilon_db, s.l_rain_linear, s.rate, s.valid]


def _rate_from_list(v) -> RateSample:
    return RateSample(int(v[0]), float(v[1]), float(v[2]), float(v[3]), bool(v[4]))


def _record_to_list(r: OutputRecord) -> list:
    return [r.k, r.epsilon_db, r.rain_flag, r.l_rain_db, r.rate_mm_per_h, r.quality]


def _record_from_list(sid: str, v) -> OutputRecord:
    return OutputRecord(sid, int(v[0]), float(v[1]), bool(v[2]), v[3], v[4], v[5])


def _event_to_record(e: RainEvent) -> dict:
    return {"start_k": e.start_k, "frozen_dry_ref": e.frozen_dry_ref, "h0": e.isotherm_height,
            "end_k": e.end_k, "samples": [_rate_to_list(s) for s in e.samples]}


def _closed_to_record(e: ClosedEvent) -> dict:
    return {"quality": e.quality, **_event_to_record(e.event)}


def _closed_from_record(sid: str, d: dict) -> ClosedEvent:
    ev = RainEvent(d["start_k"], d["frozen_dry_ref"], d["h0"], [_rate_from_list(s) for s in d["samples"]],
                   d["end_k"])
    return ClosedEvent(sid, ev, d["quality"])


def _station_to_record(s: _Station) -> dict:
    ev = None
    if s.event is not None:
        ev = {"start_k": s.event.start_k, "frozen_dry_ref": s.event.frozen_dry_ref, "h0": s.event.h0,
              "quality": s.event.quality, "samples": [_rate_to_list(x) for x in s.event.samples]}
    return {
        "st": None if s.st is None else s.st.to_record(),
        "ft": None if s.ft is None else s.ft.to_record(),
        "det": s.det.to_record(),
        "st_at_candidate": None if s.st_at_candidate is None else s.st_at_candidate.to_record(),
        "cand_h0": s.cand_h0,
        "cand_quality": s.cand_quality,
        "event": ev,
        "held": None if s.held is None else _record_to_list(s.held),
        "last_k": s.last_k,
    }


def _station_from_record(rec: StationRecord, d: dict) -> _Station:
    def ts(v):
        return None if v is None else TrackerState.from_record(v)

    ev = d["event"]
    if ev is not None:
        ev = _OpenEvent(ev["start_k"], ev["frozen_dry_ref"], ev["h0"], ev["quality"],
                        tuple(_rate_from_list(x) for x in ev["samples"]))
    held = None if d["held"] is None else _record_from_list(rec.station_id, d["held"])
    return _Station(rec, ts(d["st"]), ts(d["ft"]), DetectorState.from_record(d["det"]), ts(d["st_at_candidate"]),
                    d["cand_h0"], d["cand_quality"], ev, held, d["last_k"])


# --------------------------------------------------------------- entry points


@dataclass
class RunResult:
    records: list[OutputRecord]
    events: list[ClosedEvent]
    diagnostics: list[Diagnostic]
    global_fades: list[GlobalFadeEvent]


def run_network(series: Mapping[str, Sequence[SnrSample]], stations: Mapping[str, StationRecord],
                cfg: PipelineConfig = PipelineConfig(), forecast: IsothermForecast | None = None,
                transits: Sequence[TransitWindow] = ()) -> RunResult:
    p = Pipeline(stations, cfg, forecast, transits)
    p.run(series)
    p.finish()
    return RunResult(p.records, p.events, p.diagnostics, p.global_fades)


def run_station(samples: Sequence[SnrSample], station: StationRecord, forecast: IsothermForecast | None = None,
                cfg: PipelineConfig = PipelineConfig(), transits: Sequence[TransitWindow] = ()) -> RunResult:
    """Single-station run; cross-station checks never fire."""
    return run_network({station.station_id: samples}, {station.station_id: station}, cfg, forecast, transits)


# -------------------------------------------------------------------- output


def fmt_db(x: float | None) -> str:
    if x is None or not math.isfinite(x):
        return "null"
    return f"{x + 0.0:.3f}".replace("-0.000", "0.000")


def fmt_rate(x: float | None) -> str:
    if x is None or not math.isfinite(x):
        return "null"
    return f"{x + 0.0:.4g}"


def format_record(r: OutputRecord) -> str:
    return (f'{{"station_id": {json.dumps(r.station_id)}, "timestamp": "{format_timestamp(r.t_s)}", '
            f'"epsilon_db": {fmt_db(r.epsilon_db)}, "rain_flag": {"true" if r.rain_flag else "false"}, '
            f'"l_rain_db": {fmt_db(r.l_rain_db)}, "rate_mm_per_h": {fmt_rate(r.rate_mm_per_h)}, '
            f'"quality_flag": "{r.quality}"}}')


EVENT_COLUMNS = ["station_id", "event", "start", "end", "peak_rate_mm_per_h", "cumulative_mm", "h0_km",
                 "frozen_dry_ref_db", "samples", "invalid_samples", "quality"]


def event_rows(events: Sequence[ClosedEvent]) -> list[list[str]]:
    rows = []
    counters: dict[str, int] = {}
    for ce in events:
        e = ce.event
        n = counters[ce.station_id] = counters.get(ce.station_id, 0) + 1
        rows.append([
            ce.station_id, str(n), format_timestamp(from_sample_index(e.start_k)),
            "" if e.end_k is None else format_timestamp(from_sample_index(e.end_k)),
            fmt_rate(e.peak_rate), fmt_rate(e.cumulative_mm), f"{e.isotherm_height:.3f}",
            fmt_db(e.frozen_dry_ref), str(len(e.samples)), str(len(e.samples) - len(e.valid_samples)), ce.quality,
        ])
    return rows


def write_outputs(result: RunResult, records_path, events_path) -> None:
    with open(records_path, "w", newline="\n") as fh:
        for r in result.records:
            fh.write(format_record(r) + "\n")
    with open(events_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        w.writerows(event_rows(result.events))


def read_rate_records(path) -> dict[str, list[tuple[int, float]]]:
    """Per-station ``(t_s, rate)`` series from an output records file; null rates read as 0."""
    out: dict[str, list[tuple[int, float]]] = {}
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                t = parse_timestamp(rec["timestamp"])
                rate = rec["rate_mm_per_h"]
                out.setdefault(str(rec["station_id"]), []).append((t, 0.0 if rate is None else float(rate)))
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{n}: bad record ({exc})") from exc
    return out
