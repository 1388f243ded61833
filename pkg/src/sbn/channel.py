"""Link model: power-controlled active links plus cognitive backscatter.

Active transmitters scale their power with distance so that the mean receive
SNR sits at ``gamma_bar``; a Rayleigh fade then gives a closed-form outage.
A paired backscatter tag reflects the primary carrier, which both adds
multipath gain to the primary link and carries its own message for free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

D_MIN = 1.0  # m, clamp for tx_power


@dataclass(frozen=True)
class ChannelParams:
    alpha: float = 3.0
    p_ref: float = 0.1
    d_ref: float = 100.0
    gamma_bar: float = 10.0
    gamma_th: float = 1.0
    gain_g: float = 1.0
    kappa: float = 0.95
    bandwidth_hz: float = 20e6
    spectral_eff: float = 1.0
    msg_bits: float = 16384.0
    prop_speed: float = 3e8

    def __post_init__(self):
        checks = {
            "alpha": self.alpha >= 2,
            "p_ref": self.p_ref > 0,
            "d_ref": self.d_ref > 0,
            "gamma_bar": self.gamma_bar > 0,
            "gamma_th": self.gamma_th > 0,
            "gain_g": self.gain_g >= 0,
            "kappa": 0 < self.kappa <= 1,
            "bandwidth_hz": self.bandwidth_hz > 0,
            "spectral_eff": self.spectral_eff > 0,
            "msg_bits": self.msg_bits > 0,
            "prop_speed": self.prop_speed > 0,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ValueError(f"invalid channel parameters: {', '.join(bad)}")

    @property
    def t_msg(self) -> float:
        """Airtime of one consensus message (s)."""
        return self.msg_bits / (self.bandwidth_hz * self.spectral_eff)


def tx_power(d: float, params: ChannelParams) -> float:
    """Transmit power (W) needed to hold the target mean SNR at distance ``d``."""
    return params.p_ref * (max(d, D_MIN) / params.d_ref) ** params.alpha


def link_success_prob(boosted: bool, params: ChannelParams) -> float:
    if boosted:
        return math.exp(-params.gamma_th / (params.gamma_bar * (1.0 + params.gain_g)))
    return math.exp(-params.gamma_th / params.gamma_bar)


def backscatter_success_prob(params: ChannelParams) -> float:
    return params.kappa * link_success_prob(True, params)


def message_energy(params: ChannelParams, d: float | None = None, *, backscatter: bool = False) -> float:
    """Energy (J) of a single message attempt.

    Backscatter rides the primary carrier and costs nothing; an active
    message costs ``tx_power(d) * t_msg``.
    """
    if backscatter:
        return 0.0
    if d is None or d < 0:
        raise ValueError("active message needs a distance d >= 0")
    return tx_power(d, params) * params.t_msg


def message_latency(d: float, attempts: int, params: ChannelParams) -> float:
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    return attempts * (params.t_msg + d / params.prop_speed)
