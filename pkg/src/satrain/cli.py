"""``satrain`` command line: simulate, process, curve, compare.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np

from satrain.config import ENV_VAR, EngineConfig, load_config
from satrain.errors import ConfigError, DataError, InversionError
from satrain.pipeline import (
    Pipeline,
    RunResult,
    StationRecord,
    fmt_rate,
    ingest,
    load_forecast,
    load_stations,
    load_transits,
    read_rate_records,
    write_outputs,
)
from satrain.rain_model import RainPathGeometry, characteristic_curve
from satrain.simulate import simulate, write_simulation
from satrain.validation import compare, format_metrics, read_tbrg_csv, read_truth_csv, tbrg_rate

log = logging.getLogger("satrain")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(" ", "").split(",") if x]


def _grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive stop) or a comma list."""
    if not text.strip():
        return []
    if ":" in text:
        a, b, s = (float(x) for x in text.split(":"))
        if not s > 0:
            raise ConfigError("grid step must be > 0")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        return [round(a + i * s, 10) for i in range(max(n, 0))]
    return _floats(text)


def cmd_simulate(args, cfg: EngineConfig) -> int:
    sim = simulate(cfg, args.seed)
    paths = write_simulation(sim, args.out)
    n = sum(len(tr) for tr in sim.traces)
    print(f"seed {args.seed}: {len(sim.traces)} station(s), {n} samples, "
          f"{len(sim.scenario.events)} rain event(s), {len(sim.transits)} sun transit(s)")
    for ev in sim.scenario.events:
        print(f"  event k={ev.start_k} duration={ev.duration_min} min peak={fmt_rate(ev.peak_rate)} mm/h "
              f"depth={fmt_rate(ev.analytic_depth_mm())} mm")
    print(f"wrote {', '.join(p.name for p in paths.values())} to {args.out}")
    return EXIT_OK


def _stations_for(args, cfg: EngineConfig, ids) -> dict[str, StationRecord]:
    if args.stations:
        return load_stations(args.stations)
    sy = cfg.synth
    return {sid: StationRecord(sid, sy.latitude, sy.longitude, sy.elevation_deg, cfg.melting_thickness_km,
                               sy.h0_km) for sid in sorted(ids)}


def cmd_process(args, cfg: EngineConfig) -> int:
    try:
        with open(args.input) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read telemetry: {exc}") from exc
    raw = ingest(lines)
    stations = _stations_for(args, cfg, raw.series)
    data = ingest(lines, stations) if args.stations else raw
    forecast = load_forecast(args.forecast) if args.forecast else None
    transits = load_transits(args.transit_schedule) if args.transit_schedule else []
    pc = cfg.pipeline
    if args.no_mask:
        pc = replace(pc, mask_sun_transits=False)

    p = Pipeline(stations, pc, forecast, transits)
    p.run(data.series)
    p.finish()
    result = RunResult(p.records, p.events, data.diagnostics + p.diagnostics, p.global_fades)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_outputs(result, out / "estimates.jsonl", out / "events.csv")

    quality = Counter(r.quality for r in result.records)
    diag = Counter(d.kind for d in result.diagnostics)
    print(f"{len(result.records)} records, {len(result.events)} rain event(s), "
          f"{len(result.global_fades)} global fade(s)")
    print("quality: " + ", ".join(f"{k}={v}" for k, v in sorted(quality.items())))
    print("diagnostics: " + (", ".join(f"{k}={v}" for k, v in sorted(diag.items())) or "none"))
    return EXIT_OK


def cmd_curve(args, cfg: EngineConfig) -> int:
    h0s = []
    for h in _floats(args.h0):
        if h in h0s:
            print(f"warning: duplicate h0 {h} km ignored", file=sys.stderr)
            continue
        h0s.append(h)
    grid = _grid(args.grid)
    pc = cfg.pipeline
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["h0_km", "snr_drop_db", "rate_mm_per_h"])
        for h0 in h0s:
            g = RainPathGeometry.from_degrees(args.elevation, h0, cfg.melting_thickness_km,
                                              ml_coeffs=pc.ml_coeffs, ll_coeffs=pc.ll_coeffs)
            for drop, rate in characteristic_curve(g, pc.xi, grid):
                w.writerow([f"{h0:.3f}", f"{drop:.3f}", fmt_rate(rate)])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _reference(path: str, station: str | None, timeout_s: float | None):
    with open(path) as fh:
        head = fh.read(4096)
    if "tip_resolution" in head:
        return tbrg_rate(read_tbrg_csv(path), timeout_s)
    truth = read_truth_csv(path)
    if not truth:
        raise DataError(f"{path}: no reference rows")
    sid = station or sorted(truth)[0]
    if sid not in truth:
        raise DataError(f"{path}: no rows for station {sid}")
    return truth[sid]


def cmd_compare(args, cfg: EngineConfig) -> int:
    try:
        est_all = read_rate_records(args.input)
        ref = _reference(args.truth, args.station, args.timeout_s)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    if not est_all:
        raise DataError(f"{args.input}: no estimate records")
    sid = args.station or sorted(est_all)[0]
    if sid not in est_all:
        raise DataError(f"{args.input}: no records for station {sid}")
    t, r = zip(*est_all[sid])
    m = compare((np.array(t, dtype=float), np.array(r)), ref)
    text = f"station = {sid}\n" + format_metrics(m) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="satrain", description="Rain detection and rain-rate estimation from downlink SNR.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help=f"engine INI file (default: ${ENV_VAR}, then packaged defaults)")

    p = sub.add_parser("simulate", help="write seeded synthetic telemetry and truth")
    common(p)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", help="run the estimation pipeline on telemetry")
    common(p)
    p.add_argument("--in", dest="input", required=True, help="telemetry JSONL")
    p.add_argument("--stations", help="station registry CSV")
    p.add_argument("--forecast", help="isotherm forecast CSV")
    p.add_argument("--transit-schedule", help="sun-transit schedule CSV")
    p.add_argument("--no-mask", action="store_true", help="ignore the sun-transit schedule")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("curve", help="SNR drop to rain rate table per isotherm height")
    common(p)
    p.add_argument("--h0", default="1.5,2.5,4.0", help="comma list of isotherm heights (km)")
    p.add_argument("--grid", default="0:6:0.25", help="SNR drop grid, start:stop:step or comma list (dB)")
    p.add_argument("--elevation", type=float, default=40.0, help="elevation angle (deg)")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("compare", help="metrics of estimates against synthetic truth or a TBRG log")
    common(p)
    p.add_argument("--in", dest="input", required=True, help="estimates JSONL from process")
    p.add_argument("--truth", required=True, help="truth CSV or TBRG CSV")
    p.add_argument("--station", help="station id (default: first)")
    p.add_argument("--timeout-s", type=float, default=None, help="TBRG dry timeout (s)")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InversionError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
