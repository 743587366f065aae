"""Two-state (level + drift) Kalman trackers for the SNR stream.

The same constant-drift model serves both trackers; only the noise tuning
differs. The slow tracker follows the daily orbit-induced wander and is
frozen during rain; the fast tracker follows rain fades and only removes
scintillation.

The filter is written out on scalars so every step is an exact, bit-stable
function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from satrain.errors import ConfigError, MeasurementError

SCINTILLATION_STD_DB = 0.139
QUANTIZATION_STEP_DB = 0.1
MEASUREMENT_NOISE_DB2 = SCINTILLATION_STD_DB**2 + QUANTIZATION_STEP_DB**2 / 12.0


@dataclass(frozen=True)
class TrackerConfig:
    process_noise_level: float  # dB^2 per sample
    process_noise_drift: float  # (dB/sample)^2 per sample
    measurement_noise: float = MEASUREMENT_NOISE_DB2  # dB^2
    initial_covariance: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.0), (0.0, 1e-2))

    def __post_init__(self):
        for name in ("process_noise_level", "process_noise_drift", "measurement_noise"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        p = np.asarray(self.initial_covariance, dtype=float)
        if p.shape != (2, 2) or p[0, 1] != p[1, 0] or np.any(np.linalg.eigvalsh(p) <= 0):
            raise ConfigError("initial_covariance must be a symmetric positive-definite 2x2 matrix")


# Tunings are pinned from the bring-up study in docs/tracker_tuning.md.
FAST_TRACKER = TrackerConfig(process_noise_level=3e-4, process_noise_drift=1e-5)
SLOW_TRACKER = TrackerConfig(process_noise_level=1e-7, process_noise_drift=8e-8)


@dataclass(frozen=True)
class TrackerState:
    level: float  # dB
    drift: float  # dB per sample
    p00: float
    p01: float
    p11: float
    last_k: int = 0
    frozen: bool = False

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.p00, self.p01], [self.p01, self.p11]])

    def to_record(self) -> dict:
        return {
            "level": self.level,
            "drift": self.drift,
            "covariance": [self.p00, self.p01, self.p11],
            "last_k": self.last_k,
            "frozen": self.frozen,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TrackerState":
        p00, p01, p11 = rec["covariance"]
        return cls(float(rec["level"]), float(rec["drift"]), float(p00), float(p01), float(p11),
                   int(rec["last_k"]), bool(rec["frozen"]))


def kf_init(first_sample: float, cfg: TrackerConfig, k: int = 0) -> TrackerState:
    if not math.isfinite(first_sample):
        raise MeasurementError(f"cannot initialise a tracker on {first_sample}")
    (p00, p01), (_, p11) = cfg.initial_covariance
    return TrackerState(float(first_sample), 0.0, float(p00), float(p01), float(p11), k)


def kf_predict_only(s: TrackerState, cfg: TrackerConfig, k: int | None = None) -> TrackerState:
    """Time update without a measurement (missing sample)."""
    k = s.last_k + 1 if k is None else k
    if s.frozen:
        return replace(s, last_k=k)
    p00 = s.p00 + 2.0 * s.p01 + s.p11 + cfg.process_noise_level
    p01 = s.p01 + s.p11
    p11 = s.p11 + cfg.process_noise_drift
    return TrackerState(s.level + s.drift, s.drift, p00, p01, p11, k, False)


def kf_step(s: TrackerState, z: float, cfg: TrackerConfig, k: int | None = None) -> TrackerState:
    """Predict with constant drift, then correct on the level.

    A non-finite ``z`` leaves the state untouched; callers flag the sample.
    A frozen state ignores the measurement and keeps its level.
    """
    if not math.isfinite(z):
        return s
    k = s.last_k + 1 if k is None else k
    if s.frozen:
        return replace(s, last_k=k)

    pred = kf_predict_only(s, cfg, k)
    r = cfg.measurement_noise
    innov_var = pred.p00 + r
    k0 = pred.p00 / innov_var
    k1 = pred.p01 / innov_var
    innov = z - pred.level

    # Joseph form keeps the covariance symmetric and PSD
    a = 1.0 - k0
    p00 = a * a * pred.p00 + k0 * k0 * r
    p01 = a * (pred.p01 - k1 * pred.p00) + k0 * k1 * r
    p11 = k1 * k1 * pred.p00 - 2.0 * k1 * pred.p01 + pred.p11 + k1 * k1 * r
    return TrackerState(pred.level + k0 * innov, pred.drift + k1 * innov, p00, p01, p11, k, False)


def kf_freeze(s: TrackerState) -> TrackerState:
    return replace(s, frozen=True)


def kf_unfreeze(s: TrackerState) -> TrackerState:
    return replace(s, frozen=False)


def kf_shift(s: TrackerState, delta_db: float) -> TrackerState:
    """Move the level by ``delta_db`` keeping drift and covariance."""
    return replace(s, level=s.level + delta_db)


def run_tracker(samples, cfg: TrackerConfig) -> np.ndarray:
    """Filter a gap-free sequence and return the level after every sample."""
    samples = np.asarray(samples, dtype=float)
    out = np.empty(len(samples))
    if len(samples) == 0:
        return out
    s = kf_init(samples[0], cfg)
    out[0] = s.level
    for i in range(1, len(samples)):
        s = kf_step(s, samples[i], cfg, i)
        out[i] = s.level
    return out


def steady_state_gain(cfg: TrackerConfig, iterations: int = 100_000, tol: float = 1e-15) -> tuple[float, float]:
    """Converged Kalman gains (level, drift) of the configured filter."""
    s = TrackerState(0.0, 0.0, *cfg.initial_covariance[0], cfg.initial_covariance[1][1])
    gains = (math.nan, math.nan)
    for i in range(iterations):
        pred = kf_predict_only(s, cfg)
        innov_var = pred.p00 + cfg.measurement_noise
        new = (pred.p00 / innov_var, pred.p01 / innov_var)
        if abs(new[0] - gains[0]) < tol and abs(new[1] - gains[1]) < tol:
            return new
        gains = new
        s = kf_step(s, 0.0, cfg)
    return gains


def step_settling_samples(cfg: TrackerConfig, step_db: float = -3.0, fraction: float = 0.9,
                          max_samples: int = 10_000) -> int:
    """Samples after a step until the level first covers ``fraction`` of it.

    The filter is run to steady state on a flat input before the step.
    """
    s = kf_init(0.0, cfg)
    for i in range(1, 5000):
        s = kf_step(s, 0.0, cfg, i)
    target = fraction * step_db
    for n in range(1, max_samples + 1):
        s = kf_step(s, step_db, cfg)
        if (s.level - target) * math.copysign(1.0, step_db) >= 0:
            return n
    raise RuntimeError("tracker did not settle")
