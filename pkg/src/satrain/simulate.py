"""Build a seeded multi-station synthetic run from an engine config and write
it in the same file formats the pipeline reads."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from satrain.config import EngineConfig
from satrain.pipeline import IsothermForecast, StationRecord, TransitWindow
from satrain.rain_model import RainPathGeometry
from satrain.synth import (
    GainStep,
    ImpairmentSchedule,
    RainEventSpec,
    RainScenario,
    SunTransit,
    Trace,
    apply_impairments,
    gen_dry,
    inject_rain,
    station_rng,
)
from satrain.timeutil import format_timestamp, from_sample_index, to_sample_index


@dataclass
class Simulation:
    traces: list[Trace]
    stations: dict[str, StationRecord]
    forecast: IsothermForecast
    transits: list[TransitWindow]
    scenario: RainScenario

    @property
    def series(self):
        return {tr.station_id: tr.samples() for tr in self.traces}


def station_ids(n: int) -> list[str]:
    return [f"S{i:02d}" for i in range(1, n + 1)]


def simulate(cfg: EngineConfig, seed: int) -> Simulation:
    sy = cfg.synth
    k0 = to_sample_index(sy.start_s)
    n = sy.n_samples
    specs = [(e, RainEventSpec(k0 + e.offset_min, e.duration_min, e.peak_rate, e.shape)) for e in sy.events]
    scenario = RainScenario(tuple(spec for _, spec in specs))
    pc = cfg.pipeline
    stations, traces, windows = {}, [], []
    for i, sid in enumerate(station_ids(sy.n_stations), start=1):
        rec = StationRecord(sid, sy.latitude, sy.longitude, sy.elevation_deg, cfg.melting_thickness_km, sy.h0_km)
        stations[sid] = rec
        g = RainPathGeometry.from_degrees(sy.elevation_deg, sy.h0_km, cfg.melting_thickness_km,
                                          ml_coeffs=pc.ml_coeffs, ll_coeffs=pc.ll_coeffs)
        tr = gen_dry(sy.dry, n, seed, k0, sid, rng=station_rng(seed, i))
        local = RainScenario(tuple(spec for e, spec in specs if e.applies_to(i)))
        tr = inject_rain(tr, local, g, pc.link, cfg.carrier)
        mine = [t for t in sy.sun_transits if t.station.strip() in ("*", str(i))]
        sched = ImpairmentSchedule(
            tuple(SunTransit(k0 + t.offset_min, t.duration_min, t.depth_db) for t in mine),
            tuple(GainStep(k0 + s.offset_min, s.delta_db) for s in sy.gain_steps if s.applies_to(i)),
        )
        traces.append(apply_impairments(tr, sched))
        windows += [TransitWindow(sid, from_sample_index(k0 + t.offset_min), 60 * t.duration_min, t.depth_db)
                    for t in mine]
    step = int(round(sy.forecast_interval_h * 3600))
    n_fc = max(1, -(-n * 60 // step) + 1)
    forecast = IsothermForecast(tuple(sy.start_s + i * step for i in range(n_fc)), (sy.h0_km,) * n_fc)
    return Simulation(traces, stations, forecast, windows, scenario)


def write_simulation(sim: Simulation, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in
             ("telemetry.jsonl", "truth.csv", "forecast.csv", "transits.csv", "stations.csv")}
    with open(paths["telemetry.jsonl"], "w", newline="\n") as fh:
        for tr in sim.traces:
            for k, z in zip(tr.k, tr.measured_db):
                fh.write(f'{{"station_id": {json.dumps(tr.station_id)}, '
                         f'"timestamp": "{format_timestamp(from_sample_index(int(k)))}", '
                         f'"esn0_db": {float(z) + 0.0:.1f}}}\n')
    with open(paths["truth.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station_id", "timestamp", "true_rate_mm_per_h", "true_l_rain_db"])
        for tr in sim.traces:
            for k, r, a in zip(tr.k, tr.true_rate, tr.true_l_rain_db):
                w.writerow([tr.station_id, format_timestamp(from_sample_index(int(k))), f"{r:.6g}", f"{a:.6f}"])
    with open(paths["forecast.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["valid_time", "h0_km"])
        for t, h in zip(sim.forecast.times_s, sim.forecast.h0_km):
            w.writerow([format_timestamp(t), f"{h:.3f}"])
    with open(paths["transits.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station_id", "start", "duration_s", "depth_db"])
        for tw in sim.transits:
            w.writerow([tw.station_id, format_timestamp(tw.start_s), tw.duration_s, f"{tw.depth_db:.3f}"])
    with open(paths["stations.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station_id", "latitude", "longitude", "elevation_deg", "melting_thickness_km",
                    "default_h0_km"])
        for st in sim.stations.values():
            w.writerow([st.station_id, st.latitude, st.longitude, st.elevation_deg, st.melting_thickness_km,
                        st.default_h0_km])
    return paths
