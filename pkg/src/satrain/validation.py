"""Rain-gauge reference series, cumulative rain and estimate-vs-reference metrics."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from satrain.errors import ConfigError, DataError
from satrain.timeutil import SAMPLE_PERIOD_S, parse_timestamp


@dataclass(frozen=True)
class TbrgLog:
    tip_resolution: float  # mm per tip
    tip_times: tuple[int, ...]  # epoch seconds, ascending

    def __post_init__(self):
        if not self.tip_resolution > 0:
            raise ConfigError("tip resolution must be > 0 mm")
        if any(b < a for a, b in zip(self.tip_times, self.tip_times[1:])):
            raise DataError("tip times must be ascending")


@dataclass(frozen=True)
class StepSeries:
    """Piecewise-constant rate: ``rates[i]`` holds on ``(edges[i], edges[i+1]]``."""

    edges: np.ndarray  # s
    rates: np.ndarray  # mm/h

    def __post_init__(self):
        if len(self.edges) != len(self.rates) + 1 and not (len(self.edges) == 0 and len(self.rates) == 0):
            raise ValueError("need one more edge than rates")

    def __len__(self) -> int:
        return len(self.rates)

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoint form (duplicated edge times) whose trapezoid integral is exact."""
        if len(self.rates) == 0:
            return np.array([]), np.array([])
        t = np.repeat(self.edges, 2)[1:-1]
        r = np.repeat(self.rates, 2)
        return t, r

    def value_at(self, t_s) -> np.ndarray:
        t = np.asarray(t_s, dtype=float)
        j = np.searchsorted(self.edges, t, side="left") - 1
        inside = (j >= 0) & (j < len(self.rates))
        out = np.zeros_like(t)
        out[inside] = self.rates[j[inside]]
        return out


def tbrg_rate(log: TbrgLog, timeout_s: float | None = None) -> StepSeries:
    """Rate between consecutive tips, ``tip_resolution / dt`` with dt in hours.

    With ``timeout_s``, an inter-tip gap longer than the timeout is treated
    as dry except for its last ``timeout_s`` seconds, which carry the whole
    tip; the total depth is unchanged.
    """
    t = np.asarray(log.tip_times, dtype=float)
    if len(t) < 2:
        return StepSeries(np.array([]), np.array([]))
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise DataError("coincident tip times")
    if timeout_s is not None and not timeout_s > 0:
        raise ConfigError("timeout must be > 0 s")
    edges = [t[0]]
    rates = []
    for t1, d in zip(t[1:], dt):
        if timeout_s is not None and d > timeout_s:
            edges.append(t1 - timeout_s)
            rates.append(0.0)
            d = timeout_s
        edges.append(t1)
        rates.append(log.tip_resolution / (d / 3600.0))
    return StepSeries(np.array(edges), np.array(rates))


def cumulate(times_s: Sequence[float], rates: Sequence[float]) -> np.ndarray:
    """Running trapezoidal rain depth (mm) of a rate series (mm/h)."""
    t = np.asarray(times_s, dtype=float)
    r = np.asarray(rates, dtype=float)
    if t.shape != r.shape:
        raise ValueError("times and rates differ in length")
    if len(t) == 0:
        return np.array([])
    if np.any(~np.isfinite(r)) or np.any(r < 0):
        raise DataError("rates must be finite and >= 0")
    if np.any(np.diff(t) < 0):
        raise DataError("times must be ascending")
    inc = 0.5 * (r[1:] + r[:-1]) * np.diff(t) / 3600.0
    return np.concatenate(([0.0], np.cumsum(inc)))


def ground_footprint(h0_km: float, theta_e: float) -> float:
    """Horizontal length (km) of the slanted wet path."""
    if not 0.0 < theta_e < math.pi / 2:
        raise ConfigError(f"elevation must lie in (0, pi/2) rad, got {theta_e}")
    return h0_km / math.tan(theta_e)


@dataclass(frozen=True)
class CompareMetrics:
    peak_time_error_s: float
    peak_rate_ratio: float
    cumulative_ratio: float
    rmse: float
    n_samples: int


def _support(series) -> tuple[float, float]:
    if isinstance(series, StepSeries):
        if len(series) == 0:
            raise DataError("empty reference series")
        return float(series.edges[0]), float(series.edges[-1])
    t = np.asarray(series[0], dtype=float)
    if len(t) == 0:
        raise DataError("empty series")
    return float(t[0]), float(t[-1])


def resample(series, grid_s: np.ndarray) -> np.ndarray:
    """Values on ``grid_s``: step-hold for a :class:`StepSeries`, linear otherwise."""
    if isinstance(series, StepSeries):
        return series.value_at(grid_s)
    t, r = (np.asarray(x, dtype=float) for x in series)
    return np.interp(grid_s, t, r)


def _ratio(a: float, b: float) -> float:
    return a / b if b != 0 else math.nan


def compare(estimate, reference, period_s: int = SAMPLE_PERIOD_S) -> CompareMetrics:
    """Metrics of an estimated rate series against a reference on their common support.

    Each series is ``(times_s, rates)`` or a :class:`StepSeries`. Both are
    resampled to a grid of whole ``period_s`` steps. ``peak_time_error_s``
    is the reference peak time minus the estimate peak time.
    """
    a0, a1 = _support(estimate)
    b0, b1 = _support(reference)
    lo, hi = max(a0, b0), min(a1, b1)
    first = math.ceil(lo / period_s) * period_s
    if first > hi:
        raise DataError("estimate and reference do not overlap in time")
    grid = np.arange(first, hi + 0.5, period_s, dtype=float)
    est = resample(estimate, grid)
    ref = resample(reference, grid)
    if np.any(~np.isfinite(est)) or np.any(~np.isfinite(ref)):
        raise DataError("non-finite rates in comparison")
    dt_peak = float(grid[int(np.argmax(ref))] - grid[int(np.argmax(est))])
    cum_est = cumulate(grid, est)[-1]
    cum_ref = cumulate(grid, ref)[-1]
    return CompareMetrics(
        peak_time_error_s=dt_peak,
        peak_rate_ratio=_ratio(float(est.max()), float(ref.max())),
        cumulative_ratio=_ratio(float(cum_est), float(cum_ref)),
        rmse=float(np.sqrt(np.mean((est - ref) ** 2))),
        n_samples=len(grid),
    )


_RES_RE = re.compile(r"tip_resolution(?:_mm)?\s*[=:]\s*([0-9.eE+-]+)")


def read_tbrg_csv(path) -> TbrgLog:
    """TBRG log: a ``# tip_resolution_mm = <mm>`` header line, then ``timestamp`` rows."""
    res = None
    times = []
    with open(path, newline="") as fh:
        body = []
        for line in fh:
            if line.lstrip().startswith("#"):
                m = _RES_RE.search(line)
                if m:
                    res = float(m.group(1))
                continue
            if line.strip():
                body.append(line)
    if res is None:
        raise DataError(f"{path}: missing tip_resolution header")
    try:
        for row in csv.DictReader(body, skipinitialspace=True):
            times.append(parse_timestamp(row["timestamp"]))
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad TBRG row ({exc})") from exc
    return TbrgLog(res, tuple(times))


def read_truth_csv(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-station ``(times_s, rate)`` from a synthetic truth file."""
    acc: dict[str, tuple[list, list]] = {}
    try:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                t, r = acc.setdefault(row["station_id"], ([], []))
                t.append(parse_timestamp(row["timestamp"]))
                r.append(float(row["true_rate_mm_per_h"]))
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad truth file ({exc})") from exc
    return {sid: (np.array(t, dtype=float), np.array(r)) for sid, (t, r) in acc.items()}


def format_metrics(m: CompareMetrics) -> str:
    return "\n".join([
        f"peak_time_error_s = {m.peak_time_error_s:.0f}",
        f"peak_rate_ratio = {m.peak_rate_ratio:.4g}",
        f"cumulative_ratio = {m.cumulative_ratio:.4g}",
        f"rmse_mm_per_h = {m.rmse:.4g}",
        f"samples = {m.n_samples}",
    ])
