import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mbharvest import core
from mbharvest.core import Band, ChannelParams, SensingConfig
from mbharvest.errors import ApproximationValidityError, ScheduleError

# Reference values below come from 50-digit mpmath evaluations.
Q_INV_01 = 1.2815515655446004669651033294487428186199078243526


def test_q_function_reference_values():
    assert core.q_function(0.0) == 0.5
    assert core.q_function(1.0) == pytest.approx(0.15865525393145705141, rel=1e-14)
    assert core.q_function(3.0) == pytest.approx(0.0013498980316300945267, rel=1e-13)
    assert core.q_function(-2.0) == pytest.approx(0.97724986805182079280, rel=1e-14)


def test_q_inverse_reference_values():
    assert core.q_inverse(0.1) == pytest.approx(Q_INV_01, rel=1e-14)
    assert core.q_inverse(0.9) == pytest.approx(-Q_INV_01, rel=1e-14)
    assert core.q_inverse(0.5) == 0.0


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_q_inverse_domain(p):
    with pytest.raises(ValueError):
        core.q_inverse(p)


@given(st.floats(1e-300, 1 - 1e-16))
def test_q_inverse_round_trip(p):
    assert core.q_function(core.q_inverse(p)) == pytest.approx(p, rel=1e-9)


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_q_function_monotone(a, b):
    lo, hi = sorted((a, b))
    assert core.q_function(lo) >= core.q_function(hi)


def test_channel_gain_free_space():
    # (c / (4 pi * 10 m * 2.4 GHz))^2
    assert core.channel_gain(10.0, 2.4e9) == pytest.approx(9.8946468400720479926e-07, rel=1e-12)
    g = core.channel_gain(np.array([1.0, 2.0]), 1e9)
    assert g[0] / g[1] == pytest.approx(4.0)
    assert core.channel_gain(1.0, 1e9, ChannelParams(tx_gain=2.0, rx_gain=3.0)) == pytest.approx(6 * g[0])


@pytest.mark.parametrize("d,f", [(0.0, 1e9), (1.0, 0.0), (-1.0, 1e9)])
def test_channel_gain_rejects_nonpositive(d, f):
    with pytest.raises(ValueError):
        core.channel_gain(d, f)


def test_false_alarm_and_detection_values():
    assert core.false_alarm_prob(1.1, 400) == pytest.approx(0.022750131948179207200, rel=1e-13)
    assert core.detection_prob(1.1, 400, 0.5) == pytest.approx(0.99999995178696634886, rel=1e-13)
    # zero SNR: detection equals false alarm
    assert core.detection_prob(1.05, 300, 0.0) == pytest.approx(core.false_alarm_prob(1.05, 300))


def test_false_alarm_boundary_equals_target():
    theta = 250.0
    eps = 1 + Q_INV_01 / math.sqrt(theta)
    assert core.false_alarm_prob(eps, theta) == pytest.approx(0.1, abs=1e-12)


def test_approximation_floor():
    with pytest.raises(ApproximationValidityError):
        core.false_alarm_prob(1.1, 50, min_samples=100)
    with pytest.raises(ApproximationValidityError):
        core.detection_prob(1.1, 50, 1.0, min_samples=100)
    with pytest.raises(ValueError):
        core.detection_prob(1.1, 200, -1.0)


def test_harvest_indicator():
    assert core.harvest_indicator(2e-5, 1e-5, True) == 1
    assert core.harvest_indicator(1e-5, 1e-5, True) == 1
    assert core.harvest_indicator(9e-6, 1e-5, True) == 0
    assert core.harvest_indicator(1.0, 1e-5, False) == 0
    np.testing.assert_array_equal(core.harvest_indicator([1, 0], 0.5, [True, True]), [1, 0])


def test_energy_bookkeeping():
    assert core.sensing_energy([100, 200], 1e-6, 1e-3) == pytest.approx(3e-7)
    with pytest.raises(ValueError):
        core.sensing_energy([-1], 1e-6, 1e-3)
    h = core.harvested_energy([1, 0], [0.45, 0.45], 1.0, [100, 100], 1e-6, [1.0, 1.0], [1e-4, 1e-4])
    assert h == pytest.approx(0.45 * (1 - 1e-4) * 1e-4)
    assert core.harvested_energy([1], [0.5], 1.0, [1e6], 1e-6, [1.0], [1.0]) == 0.0
    with pytest.raises(ScheduleError):
        core.harvested_energy([1], [0.5], 1.0, [2e6], 1e-6, [1.0], [1.0])


def test_battery_update_clamps_at_zero():
    assert core.battery_update(1.0, 0.5, 0.2) == pytest.approx(1.3)
    assert core.battery_update(0.1, 0.0, 0.5) == 0.0
    assert core.battery_update(0.0, 0.0, 0.0) == 0.0


def test_hr_radius_reference():
    r = core.hr_radius(Band(0, 0.9e9), ChannelParams(), 1e-5)
    assert r == pytest.approx(8.3882020174145058394, rel=1e-12)
    # received power at the radius is exactly the threshold
    assert core.channel_gain(r, 0.9e9) * 1.0 == pytest.approx(1e-5, rel=1e-12)


def test_dbm_conversions():
    assert core.dbm_to_watt(0.0) == pytest.approx(1e-3)
    assert core.dbm_to_watt(-20.0) == pytest.approx(1e-5)
    assert core.dbm_to_watt(30.0) == pytest.approx(1.0)
    assert core.watt_to_dbm(core.dbm_to_watt(-37.5)) == pytest.approx(-37.5)


def test_sensing_config_validation():
    cfg = SensingConfig()
    assert cfg.max_samples == pytest.approx(1e6)
    assert cfg.sample_energy == pytest.approx(1e-9)
    for bad in (dict(max_false_alarm=0.5), dict(max_false_alarm=0.6), dict(min_detection=0.5),
                dict(min_samples=0.5), dict(min_samples=2e6), dict(n_slots=0), dict(sample_time=0)):
        with pytest.raises(ValueError):
            SensingConfig(**bad)


def test_band_validation():
    with pytest.raises(ValueError):
        Band(0, -1.0)
    with pytest.raises(ValueError):
        Band(0, 1e9, efficiency=1.2)
    with pytest.raises(ValueError):
        Band(0, 1e9, activity=-0.1)
