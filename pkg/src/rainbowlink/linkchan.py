"""Link budget, user placement and the sparse geometric channel.

The DL budget reproduces the bottom line of the 60 GHz table: free-space
path loss with a 1 m reference, a fixed shadowing margin and thermal noise
over the full 1 GHz noise bandwidth, so a user's DL SNR does not depend on
how many subcarriers it listens to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import speed_of_light

from .errors import DomainError
from .seeding import as_rng

THERMAL_NOISE_DBM_HZ = -174.0
# Cyclic prefix of the default numerology: 256 samples at 983.04 MHz.
DEFAULT_CP_S = 256 / 983.04e6
NLOS_ATTENUATION_DB = (6.0, 13.0)
MAX_PATHS = 4


@dataclass(frozen=True)
class PathComponent:
    """One propagation path of the geometric channel."""

    aod: float
    aoa: float
    gain: complex
    delay_s: float

    def __post_init__(self) -> None:
        for name in ("aod", "aoa"):
            if abs(getattr(self, name)) > math.pi / 2:
                raise DomainError(f"{name} outside [-pi/2, pi/2]")

    def subcarrier_gain(self, b, bandwidth_hz: float, n_sc: int):
        """Per-subcarrier complex gain ``g exp(j 2 pi b tau BW / B)``."""
        b = np.asarray(b, dtype=float)
        return self.gain * np.exp(2j * math.pi * b * self.delay_s * bandwidth_hz / n_sc)


@dataclass(frozen=True)
class LinkBudget:
    """DL budget; defaults are the 60 GHz, 64-element configuration."""

    tx_power_dbm: float = 20.0
    bs_antenna_gain_db: float = 18.1
    noise_figure_db: float = 12.0
    shadow_fading_db: float = 4.2
    pathloss_exponent: float = 2.0
    noise_bandwidth_hz: float = 1e9
    carrier_hz: float = 60e9

    @property
    def noise_power_dbm(self) -> float:
        return thermal_noise_dbm(self.noise_bandwidth_hz) + self.noise_figure_db


@dataclass(frozen=True)
class UserGeometry:
    distance_m: float
    theta: float
    dl_snr_db: float


def thermal_noise_dbm(bandwidth_hz: float) -> float:
    return THERMAL_NOISE_DBM_HZ + 10 * math.log10(bandwidth_hz)


def path_loss_db(distance_m, carrier_hz: float, exponent: float = 2.0):
    """Close-in free-space path loss with a 1 m reference distance."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    fspl_1m = 20 * math.log10(4 * math.pi * carrier_hz / speed_of_light)
    out = fspl_1m + 10 * exponent * np.log10(d)
    return float(out) if out.ndim == 0 else out


def dl_snr(distance_m, budget: LinkBudget = LinkBudget()):
    """Received DL SNR in dB, array gain included."""
    pl = path_loss_db(distance_m, budget.carrier_hz, budget.pathloss_exponent)
    return budget.tx_power_dbm + budget.bs_antenna_gain_db - pl - budget.shadow_fading_db - budget.noise_power_dbm


def ul_snr(distance_m, budget: LinkBudget = LinkBudget(), tx_power_dbm: float = 23.0,
           ul_bandwidth_hz: float = 32 * 480e3):
    """UL SNR of a narrowband user transmitting at ``tx_power_dbm``.

    Reciprocal to the DL budget except for the transmit power and the noise
    bandwidth, which is the user's own narrowband (32 subcarriers by default).
    """
    pl = path_loss_db(distance_m, budget.carrier_hz, budget.pathloss_exponent)
    noise = thermal_noise_dbm(ul_bandwidth_hz) + budget.noise_figure_db
    return tx_power_dbm + budget.bs_antenna_gain_db - pl - budget.shadow_fading_db - noise


def sample_positions(radius_m: float, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Area-uniform points in the half disk facing the array."""
    rng = as_rng(rng)
    r = radius_m * np.sqrt(rng.random(count))
    theta = rng.uniform(-math.pi / 2, math.pi / 2, count)
    return r, theta


def sample_user_geometry(
    radius_m: float, count: int, rng_seed, budget: LinkBudget = LinkBudget()
) -> list[UserGeometry]:
    """Drop ``count`` users uniformly over a half disk of ``radius_m``."""
    if radius_m <= 0 or count < 1:
        raise DomainError("radius must be positive and count at least 1")
    r, theta = sample_positions(radius_m, count, as_rng(rng_seed))
    # a user exactly at the array is pushed out to the 1 m reference distance
    snr = dl_snr(np.maximum(r, 1.0), budget)
    return [UserGeometry(float(a), float(b), float(c)) for a, b, c in zip(r, theta, snr)]


def sample_path_arrays(theta, n_paths: int, rng, cp_s: float = DEFAULT_CP_S):
    """Vectorized multipath draw for many users at once.

    Returns ``(aod, gain, delay_s)`` arrays of shape ``(len(theta), n_paths)``.
    Column 0 is the LoS path with unit gain and zero delay; the remaining
    columns get uniform AoD, uniform phase, a power offset uniform in
    [-13, -6] dB and a delay uniform in ``[0, cp_s)``.
    """
    if not 1 <= n_paths <= MAX_PATHS:
        raise DomainError(f"n_paths must be in [1, {MAX_PATHS}]")
    rng = as_rng(rng)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    m = theta.size
    aod = np.empty((m, n_paths))
    gain = np.empty((m, n_paths), dtype=complex)
    delay = np.zeros((m, n_paths))
    aod[:, 0] = theta
    gain[:, 0] = 1.0
    extra = n_paths - 1
    if extra:
        lo, hi = NLOS_ATTENUATION_DB
        aod[:, 1:] = rng.uniform(-math.pi / 2, math.pi / 2, (m, extra))
        att_db = rng.uniform(lo, hi, (m, extra))
        phase = rng.uniform(0, 2 * math.pi, (m, extra))
        gain[:, 1:] = 10 ** (-att_db / 20) * np.exp(1j * phase)
        delay[:, 1:] = rng.uniform(0, cp_s, (m, extra))
    return aod, gain, delay


def sample_channel(theta: float, n_paths: int, rng_seed, cp_s: float = DEFAULT_CP_S) -> list[PathComponent]:
    """Sparse channel of ``n_paths`` components with a LoS path at ``theta``."""
    rng = as_rng(rng_seed)
    aod, gain, delay = sample_path_arrays([theta], n_paths, rng, cp_s)
    aoa = np.concatenate([[theta], rng.uniform(-math.pi / 2, math.pi / 2, n_paths - 1)])
    return [
        PathComponent(float(aod[0, m]), float(aoa[m]), complex(gain[0, m]), float(delay[0, m]))
        for m in range(n_paths)
    ]
