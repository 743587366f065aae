import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from satrain.errors import ConfigError, MeasurementError
from satrain.synth import DrySignalModel, gen_dry, station_rng
from satrain.trackers import (
    FAST_TRACKER,
    MEASUREMENT_NOISE_DB2,
    SLOW_TRACKER,
    TrackerConfig,
    TrackerState,
    kf_freeze,
    kf_init,
    kf_predict_only,
    kf_shift,
    kf_step,
    kf_unfreeze,
    run_tracker,
    steady_state_gain,
    step_settling_samples,
)


def alpha_beta_vrf(a, b):
    # steady-state white-noise variance reduction of an alpha-beta filter
    return (2 * a * a + 2 * b - 3 * a * b) / (a * (4 - 2 * a - b))


def test_measurement_noise_includes_quantization():
    assert MEASUREMENT_NOISE_DB2 == pytest.approx(0.139**2 + 0.01 / 12)


def test_init():
    s = kf_init(10.4, FAST_TRACKER)
    assert (s.level, s.drift) == (10.4, 0.0)
    assert np.array_equal(s.covariance, np.array(FAST_TRACKER.initial_covariance))
    assert kf_init(10.4, FAST_TRACKER) == s


def test_init_rejects_non_finite():
    with pytest.raises(MeasurementError):
        kf_init(math.nan, FAST_TRACKER)


@pytest.mark.parametrize("cfg", [FAST_TRACKER, SLOW_TRACKER])
def test_constant_input_fixed_point(cfg):
    s = kf_init(0.0, cfg)
    for k in range(1, 5000):
        s = kf_step(s, 10.0, cfg, k)
    assert s.level == pytest.approx(10.0, abs=1e-9)
    assert s.drift == pytest.approx(0.0, abs=1e-10)


def test_pinned_gains_and_settling():
    fa, fb = steady_state_gain(FAST_TRACKER)
    sa, sb = steady_state_gain(SLOW_TRACKER)
    assert (fa, fb) == pytest.approx((0.21641, 0.019718), rel=1e-4)
    assert (sa, sb) == pytest.approx((0.061215, 0.0019304), rel=1e-4)
    assert step_settling_samples(FAST_TRACKER) == 7
    assert step_settling_samples(SLOW_TRACKER) == 21


def test_fast_tracker_noise_reduction():
    rng = np.random.default_rng(7)
    z = rng.normal(0.0, 0.139, 12_000)
    out = run_tracker(z, FAST_TRACKER)[2000:]
    assert out.std() <= 0.06
    a, b = steady_state_gain(FAST_TRACKER)
    assert out.std() == pytest.approx(0.139 * math.sqrt(alpha_beta_vrf(a, b)), rel=0.05)


def test_covariance_converges():
    s = kf_init(0.0, SLOW_TRACKER)
    traces = []
    for k in range(1, 10_001):
        s = kf_step(s, 0.0, SLOW_TRACKER, k)
        traces.append(s.p00 + s.p11)
    tail = np.array(traces[-100:])
    assert tail.max() - tail.min() <= 0.01 * tail.mean()


@settings(max_examples=40)
@given(st.lists(st.floats(-30.0, 30.0), min_size=1, max_size=200), st.sampled_from([FAST_TRACKER, SLOW_TRACKER]))
def test_covariance_stays_symmetric_psd(zs, cfg):
    s = kf_init(zs[0], cfg)
    for k, z in enumerate(zs[1:], start=1):
        s = kf_step(s, z, cfg, k)
        eig = np.linalg.eigvalsh(s.covariance)
        assert eig.min() >= -1e-15
        assert math.isfinite(s.level)


def test_non_finite_measurement_leaves_state():
    s = kf_init(10.0, FAST_TRACKER)
    assert kf_step(s, math.nan, FAST_TRACKER) is s
    assert kf_step(s, math.inf, FAST_TRACKER) is s


def test_predict_only_extrapolates_and_grows_uncertainty():
    s = TrackerState(10.0, 0.1, 0.01, 0.0, 0.001)
    p = kf_predict_only(s, FAST_TRACKER)
    assert p.level == pytest.approx(10.1)
    assert p.p00 > s.p00 and p.last_k == 1


def test_freeze_holds_level():
    cfg = SLOW_TRACKER
    s = kf_init(10.0, cfg)
    for k in range(1, 50):
        s = kf_step(s, 10.0 + 0.01 * k, cfg, k)
    f = kf_freeze(s)
    g = f
    for k in range(50, 150):
        g = kf_step(g, -5.0, cfg, k)
        g = kf_predict_only(g, cfg)
    assert (g.level, g.drift, g.p00, g.p01, g.p11) == (s.level, s.drift, s.p00, s.p01, s.p11)
    u = kf_step(kf_unfreeze(g), 0.0, cfg)
    assert u.level < s.level and not u.frozen


def test_shift_keeps_drift_and_covariance():
    s = TrackerState(10.0, 0.02, 0.1, 0.01, 0.001, 5)
    t = kf_shift(s, -1.0)
    assert t.level == 9.0 and (t.drift, t.p00, t.p01, t.p11, t.last_k) == (0.02, 0.1, 0.01, 0.001, 5)


def test_record_round_trip():
    s = kf_freeze(kf_step(kf_init(10.0, FAST_TRACKER), 10.3, FAST_TRACKER))
    assert TrackerState.from_record(s.to_record()) == s


def test_determinism():
    z = gen_dry(DrySignalModel(), 3000, 3).measured_db
    assert np.array_equal(run_tracker(z, FAST_TRACKER), run_tracker(z, FAST_TRACKER))


@pytest.mark.parametrize("kw", [dict(process_noise_level=0.0, process_noise_drift=1e-6),
                                dict(process_noise_level=1e-6, process_noise_drift=1e-6, measurement_noise=-1),
                                dict(process_noise_level=1e-6, process_noise_drift=1e-6,
                                     initial_covariance=((1.0, 2.0), (2.0, 1.0)))])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        TrackerConfig(**kw)


def test_dry_separation_default_tunings():
    z = gen_dry(DrySignalModel(), 7 * 1440, 11, rng=station_rng(11, 1)).measured_db
    eps = run_tracker(z, SLOW_TRACKER) - run_tracker(z, FAST_TRACKER)
    assert np.mean(np.abs(eps) < 0.15) >= 0.999
