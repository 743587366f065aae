import numpy as np
import pytest

from satrain.errors import ConfigError
from satrain.link_budget import lin_to_db, snr_dry, snr_wet, db_to_lin
from satrain.rain_model import total_attenuation_db
from satrain.synth import (
    DrySignalModel,
    GainStep,
    ImpairmentSchedule,
    RainEventSpec,
    RainScenario,
    SunTransit,
    apply_impairments,
    default_rain_scenario,
    gen_dry,
    inject_rain,
    periodogram_peak_period,
    quantize,
    station_rng,
    truth_crossings,
)

WEEK = 7 * 1440


def test_noiseless_flat_stream():
    tr = gen_dry(DrySignalModel(10.4, 0.0, 0.0, 0.0), 500, 1)
    assert np.all(tr.measured_db == pytest.approx(10.4))


def test_week_statistics():
    m = DrySignalModel()
    tr = gen_dry(m, WEEK, 42)
    assert tr.clean_db.mean() == pytest.approx(m.mean_snr, abs=0.01)
    assert tr.noise_db.std() == pytest.approx(0.139, abs=0.01)
    assert tr.measured_db.mean() == pytest.approx(m.mean_snr, abs=0.01)
    period, df = periodogram_peak_period(tr.measured_db)
    assert abs(1 / period - 1 / 1440) <= df


def test_quantization_grid():
    z = gen_dry(DrySignalModel(), 1000, 5).measured_db
    assert np.allclose(z * 10, np.round(z * 10))
    assert quantize([0.04, 0.06, -0.05]) == pytest.approx([0.0, 0.1, -0.0], abs=1e-12)


def test_seeded_streams():
    a = gen_dry(DrySignalModel(), 100, 3, rng=station_rng(3, 1)).noise_db
    b = gen_dry(DrySignalModel(), 100, 3, rng=station_rng(3, 1)).noise_db
    c = gen_dry(DrySignalModel(), 100, 3, rng=station_rng(3, 2)).noise_db
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_zero_rate_event_changes_nothing(geom, link, carrier):
    tr = gen_dry(DrySignalModel(), 300, 1)
    out = inject_rain(tr, RainScenario((RainEventSpec(100, 60, 0.0),)), geom, link, carrier)
    assert np.array_equal(out.measured_db, tr.measured_db)
    assert not out.true_rate.any()


def test_injection_matches_forward_model(geom, link, carrier):
    tr = gen_dry(DrySignalModel(scint_std=0.0), 400, 1)
    ev = RainEventSpec(100, 120, 20.0)
    out = inject_rain(tr, RainScenario((ev,)), geom, link, carrier)
    i = int(np.argmax(out.true_rate))
    expect = lin_to_db(snr_wet(carrier, link, db_to_lin(total_attenuation_db(20.0, geom))) / snr_dry(carrier, link))
    assert out.clean_db[i] - tr.clean_db[i] == pytest.approx(expect, rel=1e-12)
    drop = tr.clean_db - out.clean_db
    assert out.true_rate[int(np.argmax(drop))] == 20.0


@pytest.mark.parametrize("shape", ["trapezoid", "double-peak"])
def test_truth_conserves_depth(geom, link, carrier, shape):
    ev = RainEventSpec(100, 150, 50.0, shape)
    out = inject_rain(gen_dry(DrySignalModel(), 400, 1), RainScenario((ev,)), geom, link, carrier)
    assert out.true_rate.sum() / 60 == pytest.approx(ev.analytic_depth_mm(), rel=0.005)


def test_default_scenario():
    sc = default_rain_scenario(0)
    assert [e.peak_rate for e in sc.events] == [5.0, 20.0, 50.0]
    assert all(0 < e.start_k and e.end_k < WEEK for e in sc.events)


def test_overlapping_events_rejected():
    with pytest.raises(ConfigError):
        RainScenario((RainEventSpec(0, 60, 5.0), RainEventSpec(30, 60, 5.0)))


def test_identity_schedule():
    tr = gen_dry(DrySignalModel(), 200, 1)
    assert np.array_equal(apply_impairments(tr, ImpairmentSchedule()).measured_db, tr.measured_db)


def test_gain_step_persists():
    tr = gen_dry(DrySignalModel(scint_std=0.0, diurnal_amplitude=0.0), 200, 1)
    out = apply_impairments(tr, ImpairmentSchedule(gain_steps=(GainStep(50, -1.0),)))
    assert np.all(out.offset_db[:50] == 0) and np.all(out.offset_db[50:] == -1.0)


def test_sun_transit_notch():
    tr = gen_dry(DrySignalModel(scint_std=0.0, diurnal_amplitude=0.0), 200, 1)
    out = apply_impairments(tr, ImpairmentSchedule((SunTransit(100, 8, 6.0),)))
    notch = out.offset_db
    assert notch.min() == pytest.approx(-6.0)
    assert int(np.argmin(notch)) == 104
    assert np.all(notch[:100] == 0) and np.all(notch[108:] == 0)


def test_overlapping_transits_rejected():
    with pytest.raises(ConfigError):
        ImpairmentSchedule((SunTransit(0, 10, 3.0), SunTransit(5, 10, 3.0)))


def test_truth_crossings(geom, link, carrier):
    from satrain.link_budget import compute_xi
    tr = inject_rain(gen_dry(DrySignalModel(), 600, 1), RainScenario((RainEventSpec(100, 120, 20.0),)),
                     geom, link, carrier)
    ((on, off),) = truth_crossings(tr, compute_xi(link), 0.3, 0.2)
    assert 100 < on < 130 and 190 < off <= 221
