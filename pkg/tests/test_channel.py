import math

import pytest
from hypothesis import given, strategies as st

from sbn.channel import (
    ChannelParams,
    backscatter_success_prob,
    link_success_prob,
    message_energy,
    message_latency,
    tx_power,
)

CH = ChannelParams()


def test_airtime_of_one_message():
    # 16384 bits over 20 MHz at 1 bit/s/Hz
    assert CH.t_msg == pytest.approx(819.2e-6, rel=1e-12)


def test_power_control_frozen_values():
    assert tx_power(100.0, CH) == pytest.approx(0.1)
    assert tx_power(200.0, CH) == pytest.approx(0.8)
    assert tx_power(0.0, CH) == pytest.approx(0.1 * 1e-6)  # clamped to 1 m
    assert message_energy(CH, 100.0) == pytest.approx(8.192e-5)


def test_outage_closure():
    assert link_success_prob(False, CH) == pytest.approx(math.exp(-0.1))
    assert link_success_prob(True, CH) == pytest.approx(math.exp(-0.05))
    assert backscatter_success_prob(CH) == pytest.approx(0.95 * math.exp(-0.05))


def test_backscatter_is_free():
    assert message_energy(CH, backscatter=True) == 0.0
    with pytest.raises(ValueError):
        message_energy(CH)


@pytest.mark.parametrize("field,value", [("alpha", 1.5), ("kappa", 0.0), ("bandwidth_hz", -1.0)])
def test_rejects_bad_params(field, value):
    with pytest.raises(ValueError):
        ChannelParams(**{field: value})


@given(st.floats(1.0, 5000.0), st.floats(1.01, 4.0))
def test_energy_scales_with_distance_power(d, k):
    e1, e2 = message_energy(CH, d), message_energy(CH, d * k)
    assert e2 / e1 == pytest.approx(k ** CH.alpha, rel=1e-9)


@given(st.floats(0.0, 10.0))
def test_boost_never_hurts(g):
    c = ChannelParams(gain_g=g)
    assert link_success_prob(True, c) >= link_success_prob(False, c)


@given(st.floats(0.0, 1e4), st.integers(1, 6))
def test_latency_grows_with_attempts(d, a):
    assert message_latency(d, a + 1, CH) > message_latency(d, a, CH)


def test_reference_examples():
    assert backscatter_success_prob(ChannelParams(kappa=0.5, gain_g=0.0)) == pytest.approx(0.5 * math.exp(-0.1))
    assert message_energy(CH, 200.0) == pytest.approx(0.8 * 819.2e-6)
    assert message_latency(3e5, 1, CH) == pytest.approx(CH.t_msg + 1e-3)
