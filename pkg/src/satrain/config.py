"""Engine configuration from INI files.

The packaged ``data/default.ini`` is always read first; a user file only
overrides the keys it sets. Keys carrying dB values end in ``_db``.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from satrain.detector import DetectorConfig
from satrain.errors import ConfigError
from satrain.link_budget import CarrierParams, LinkNoiseParams, wavelength_for
from satrain.pipeline import GlobalFadePolicy, PipelineConfig
from satrain.rain_model import PowerLawCoeffs
from satrain.synth import DrySignalModel
from satrain.timeutil import parse_timestamp
from satrain.trackers import MEASUREMENT_NOISE_DB2, TrackerConfig

ENV_VAR = "SATRAIN_CONFIG"


def _selects(stations: str, index: int) -> bool:
    return stations.strip() == "*" or str(index) in stations.split()


@dataclass(frozen=True)
class EventLine:
    offset_min: int
    duration_min: int
    peak_rate: float
    shape: str = "trapezoid"
    stations: str = "*"  # "*" or space-separated 1-based indices

    def applies_to(self, index: int) -> bool:
        return _selects(self.stations, index)


@dataclass(frozen=True)
class TransitLine:
    station: str  # "*" or 1-based index
    offset_min: int
    duration_min: int
    depth_db: float


@dataclass(frozen=True)
class GainStepLine:
    offset_min: int
    delta_db: float
    stations: str = "*"

    def applies_to(self, index: int) -> bool:
        return _selects(self.stations, index)


@dataclass(frozen=True)
class SynthSettings:
    start_s: int
    days: float
    n_stations: int
    latitude: float
    longitude: float
    elevation_deg: float
    h0_km: float
    forecast_interval_h: float
    dry: DrySignalModel
    events: tuple[EventLine, ...] = ()
    sun_transits: tuple[TransitLine, ...] = ()
    gain_steps: tuple[GainStepLine, ...] = ()

    @property
    def n_samples(self) -> int:
        return int(round(self.days * 1440))


@dataclass(frozen=True)
class EngineConfig:
    pipeline: PipelineConfig
    carrier: CarrierParams
    melting_thickness_km: float
    synth: SynthSettings


def _lines(raw: str) -> list[list[str]]:
    out = []
    for line in raw.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append([f.strip() for f in line.split(",")])
    return out


def _tracker(sec: configparser.SectionProxy) -> TrackerConfig:
    return TrackerConfig(
        process_noise_level=sec.getfloat("process_noise_level"),
        process_noise_drift=sec.getfloat("process_noise_drift"),
        measurement_noise=sec.getfloat("measurement_noise", fallback=MEASUREMENT_NOISE_DB2),
        initial_covariance=((sec.getfloat("initial_level_var", fallback=1.0), 0.0),
                            (0.0, sec.getfloat("initial_drift_var", fallback=1e-2))),
    )


def default_config_text() -> str:
    return resources.files("satrain").joinpath("data/default.ini").read_text()


def read_parser(path: str | os.PathLike | None = None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(default_config_text(), source="<default>")
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            cp.read_string(p.read_text(), source=str(p))
        except configparser.Error as exc:
            raise ConfigError(f"{p}: {exc}") from exc
    return cp


def load_config(path: str | os.PathLike | None = None) -> EngineConfig:
    """Engine config from ``path``, else ``$SATRAIN_CONFIG``, else the defaults."""
    cp = read_parser(path)
    try:
        return _build(cp)
    except (ValueError, KeyError, configparser.Error) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad configuration: {exc}") from exc


def _build(cp: configparser.ConfigParser) -> EngineConfig:
    lk = cp["link"]
    link = LinkNoiseParams.from_db(
        lk.getfloat("atm_loss_db"), lk.getfloat("cloud_loss_db"),
        t_cosmos=lk.getfloat("t_cosmos_k"), t_meteo=lk.getfloat("t_meteo_k"),
        t_ground=lk.getfloat("t_ground_k"), t_receiver=lk.getfloat("t_receiver_k"),
    )
    if not link.t_meteo > link.t_cosmos:
        raise ConfigError("t_meteo_k must be greater than t_cosmos_k")

    ca = cp["carrier"]
    lam = wavelength_for(ca.getfloat("frequency_ghz") * 1e9)
    gain = ca.getfloat("aperture_efficiency") * (math.pi * ca.getfloat("dish_diameter_m") / lam) ** 2
    carrier = CarrierParams(ca.getfloat("flux_density_w_m2"), gain, lam, ca.getfloat("symbol_rate_baud"))

    rm = cp["rain_model"]
    ll = PowerLawCoeffs(rm.getfloat("alpha_ll"), rm.getfloat("beta_ll"))
    ml = PowerLawCoeffs(rm.getfloat("alpha_ml"), rm.getfloat("beta_ml"))
    delta = rm.getfloat("melting_thickness_km")
    if not delta > 0:
        raise ConfigError("melting_thickness_km must be > 0")

    de = cp["detector"]
    det = DetectorConfig(de.getfloat("start_threshold_db"), de.getfloat("end_threshold_db"),
                         de.getint("min_event_samples"))
    gf = cp["global_fade"]
    pol = GlobalFadePolicy(gf.getint("window"), gf.getfloat("station_fraction"), gf.getfloat("step_depth_db"))
    pl = cp["pipeline"]
    pipe = PipelineConfig(link, _tracker(cp["slow_tracker"]), _tracker(cp["fast_tracker"]), det, pol, ml, ll,
                          int(round(pl.getfloat("forecast_max_age_h") * 3600)), pl.getboolean("mask_sun_transits"))

    sy = cp["synth"]
    dry = DrySignalModel(sy.getfloat("mean_snr_db"), sy.getfloat("diurnal_amplitude_db"),
                         sy.getfloat("diurnal_phase_rad"), sy.getfloat("scint_std_db"),
                         sy.getfloat("drift_db_per_day"))
    sc = cp["scenario"]
    events = []
    for f in _lines(sc.get("events", "")):
        if len(f) not in (3, 4, 5):
            raise ConfigError(f"scenario event needs 3 to 5 fields: {f}")
        events.append(EventLine(int(f[0]), int(f[1]), float(f[2]), *f[3:]))
    transits = []
    for f in _lines(sc.get("sun_transits", "")):
        if len(f) != 4:
            raise ConfigError(f"sun transit needs 4 fields: {f}")
        if f[0] != "*" and not f[0].isdigit():
            raise ConfigError(f"sun transit station must be * or an index: {f[0]}")
        transits.append(TransitLine(f[0], int(f[1]), int(f[2]), float(f[3])))
    steps = []
    for f in _lines(sc.get("gain_steps", "")):
        if len(f) not in (2, 3):
            raise ConfigError(f"gain step needs 2 or 3 fields: {f}")
        steps.append(GainStepLine(int(f[0]), float(f[1]), f[2] if len(f) == 3 else "*"))
    synth = SynthSettings(
        parse_timestamp(sy.get("start")), sy.getfloat("days"), sy.getint("stations"),
        sy.getfloat("latitude"), sy.getfloat("longitude"), sy.getfloat("elevation_deg"),
        sy.getfloat("h0_km"), sy.getfloat("forecast_interval_h"), dry,
        tuple(events), tuple(transits), tuple(steps),
    )
    if synth.n_stations < 1 or synth.days < 0:
        raise ConfigError("[synth] needs stations >= 1 and days >= 0")
    if synth.start_s % 60:
        raise ConfigError("[synth] start must fall on a whole minute")
    return EngineConfig(pipe, carrier, delta, synth)
