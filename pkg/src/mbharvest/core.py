"""Physical and statistical primitives.

Channel gains, the Gaussian tail function and its inverse, energy-detector
false-alarm / detection probabilities, the harvesting indicator and the
per-slot energy bookkeeping.  Everything here is a pure function of its
arguments and works in SI units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ApproximationValidityError, ScheduleError

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class Band:
    index: int
    frequency: float  # Hz
    pu_power: float = 1.0  # W
    efficiency: float = 0.45
    activity: float = 1.0  # per-slot probability that the PU transmits

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"band {self.index}: frequency must be > 0")
        if self.pu_power < 0:
            raise ValueError(f"band {self.index}: PU power must be >= 0")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"band {self.index}: efficiency must lie in [0, 1]")
        if not 0.0 <= self.activity <= 1.0:
            raise ValueError(f"band {self.index}: activity must lie in [0, 1]")


@dataclass(frozen=True)
class ChannelParams:
    tx_gain: float = 1.0
    rx_gain: float = 1.0
    speed_of_light: float = 3e8
    noise_variance: float = 1e-10  # W

    def __post_init__(self):
        if self.tx_gain <= 0 or self.rx_gain <= 0:
            raise ValueError("antenna gains must be > 0")
        if self.noise_variance <= 0:
            raise ValueError("noise variance must be > 0")
        if self.speed_of_light <= 0:
            raise ValueError("speed of light must be > 0")


@dataclass(frozen=True)
class SensingConfig:
    sample_time: float = 1e-6  # s
    slot_length: float = 1.0  # s
    sensing_power: float = 1e-3  # W
    max_false_alarm: float = 0.1
    min_detection: float = 0.9
    min_samples: float = 100.0
    harvest_threshold: float = 1e-5  # W
    n_slots: int = 20
    # Listed with the system parameters but never used by any constraint.
    battery_threshold: float = 1e-3  # J

    def __post_init__(self):
        if not 0.0 < self.max_false_alarm < 0.5 < self.min_detection < 1.0:
            raise ValueError(
                "need 0 < max_false_alarm < 0.5 < min_detection < 1, got "
                f"{self.max_false_alarm}, {self.min_detection}"
            )
        if self.sample_time <= 0 or self.slot_length <= 0:
            raise ValueError("sample_time and slot_length must be > 0")
        if self.sensing_power < 0 or self.harvest_threshold < 0:
            raise ValueError("powers must be >= 0")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        if self.min_samples > self.max_samples:
            raise ValueError("min_samples exceeds slot_length / sample_time")
        if self.n_slots < 1:
            raise ValueError("n_slots must be >= 1")

    @property
    def max_samples(self) -> float:
        return self.slot_length / self.sample_time

    @property
    def sample_energy(self) -> float:
        """Energy spent on one sensing sample (J)."""
        return self.sample_time * self.sensing_power


def channel_gain(d, f, params: ChannelParams = ChannelParams()):
    """Free-space gain ``G_t G_r (c / (4 pi d f))**2``; accepts arrays."""
    d = np.asarray(d, dtype=float)
    f = np.asarray(f, dtype=float)
    if np.any(d <= 0) or np.any(f <= 0):
        raise ValueError("distance and frequency must be > 0")
    g = params.tx_gain * params.rx_gain * (params.speed_of_light / (FOUR_PI * d * f)) ** 2
    return g[()] if g.ndim == 0 else g


def q_function(x):
    """Upper tail probability of the standard normal distribution."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))[()]


def q_inverse(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("q_inverse is defined on the open interval (0, 1)")
    # ndtri(1 - p) loses digits for tiny p; the symmetric form does not.
    return (-special.ndtri(p))[()]


def _check_samples(theta, min_samples):
    if np.any(np.asarray(theta) < min_samples):
        raise ApproximationValidityError(
            f"Gaussian approximation needs at least {min_samples} samples"
        )


def false_alarm_prob(eps, theta, min_samples: float = 1.0):
    """``Q((eps - 1) sqrt(theta))`` under normalised noise variance."""
    _check_samples(theta, min_samples)
    if np.any(np.asarray(eps) < 0):
        raise ValueError("threshold must be >= 0")
    return q_function((np.asarray(eps, dtype=float) - 1.0) * np.sqrt(theta))


def detection_prob(eps, theta, snr, min_samples: float = 1.0):
    _check_samples(theta, min_samples)
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("SNR must be >= 0")
    return q_function((np.asarray(eps, dtype=float) - snr - 1.0) * np.sqrt(theta) / (snr + 1.0))


def snr(power, gain, noise_variance):
    return np.asarray(power, dtype=float) * gain / noise_variance


def harvest_indicator(avg_rx_power, threshold, pu_active):
    """1 when the PU is on and the received power reaches the threshold."""
    hit = np.logical_and(pu_active, np.asarray(avg_rx_power) >= threshold)
    return hit.astype(int)[()]


def sensing_energy(theta, sample_time, sensing_power):
    """Total sensing energy over the bands of one SU (J)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("sample counts must be >= 0")
    return float(np.sum(theta) * sample_time * sensing_power)


def harvested_energy(delta, efficiency, slot_length, theta, sample_time, power, gain):
    """Energy harvested over all bands in the time left after sensing (J)."""
    theta = np.asarray(theta, dtype=float)
    remaining = slot_length - theta * sample_time
    # relative slack for theta == T / T_s computed in floating point
    if np.any(remaining < -1e-12 * slot_length):
        raise ScheduleError("sensing time exceeds the slot length")
    remaining = np.maximum(remaining, 0.0)
    return float(np.sum(np.asarray(delta) * np.asarray(efficiency) * remaining * np.asarray(power) * np.asarray(gain)))


def battery_update(previous, harvested, spent):
    return max(previous + harvested - spent, 0.0)


def hr_radius(band: Band, params: ChannelParams, threshold: float) -> float:
    """Distance at which the received PU power drops to ``threshold``."""
    wavelength = params.speed_of_light / band.frequency
    return wavelength / FOUR_PI * math.sqrt(band.pu_power * params.tx_gain * params.rx_gain / threshold)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0
