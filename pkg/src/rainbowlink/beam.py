"""Rainbow-beam geometry for a true-time-delay uniform linear array.

With inter-element delay ``1/bandwidth`` the analog combiner of subcarrier
``b`` is ``w_b[i] = exp(j 2 pi b i / B)``, so every subcarrier points at its
own direction ``sin(theta) = 2 b / B``. The post-beamforming power gain of a
user at angle ``theta`` on subcarrier ``b`` is the Fejer kernel

    |a(theta)^H w_b|^2 = F_N(pi (2 b - B sin(theta)) / B),
    F_N(x) = |sin(N x / 2) / sin(x / 2)|^2.

Offsets are measured in the dimensionless sin-space unit
``zeta = 2 b* - B sin(theta)``; the anchor subcarrier ``b*`` keeps
``|zeta| <= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConfigError, DomainError

# Below this |sin(x/2)| the kernels are evaluated through their limit.
_SINGULAR_EPS = 1e-12
_HALF_PI = math.pi / 2


@dataclass(frozen=True)
class ArrayConfig:
    """Base-station array and wideband OFDM grid.

    Parameters
    ----------
    n_bs : int
        Number of array elements (half-wavelength spacing).
    n_sc : int
        Total subcarrier count ``B``.
    bandwidth_hz : float
        Total bandwidth; the inter-element delay tap is ``1 / bandwidth_hz``.
    carrier_hz : float
        Center frequency.
    """

    n_bs: int = 64
    n_sc: int = 2048
    bandwidth_hz: float = 1e9
    carrier_hz: float = 60e9

    def __post_init__(self) -> None:
        if int(self.n_bs) != self.n_bs or self.n_bs < 1:
            raise ConfigError(f"n_bs must be a positive integer, got {self.n_bs!r}")
        if int(self.n_sc) != self.n_sc or self.n_sc < self.n_bs:
            raise ConfigError(f"n_sc must be an integer >= n_bs ({self.n_bs}), got {self.n_sc!r}")
        if not self.bandwidth_hz > 0:
            raise ConfigError(f"bandwidth_hz must be positive, got {self.bandwidth_hz!r}")
        if not self.carrier_hz > 0:
            raise ConfigError(f"carrier_hz must be positive, got {self.carrier_hz!r}")

    @property
    def delay_tap_s(self) -> float:
        return 1.0 / self.bandwidth_hz


@dataclass(frozen=True)
class AnchorInfo:
    """Anchor subcarrier of a user and its sin-space offset ``zeta``."""

    anchor_sc: int
    zeta: float


def _check_angle(theta) -> np.ndarray:
    t = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(np.abs(t) > _HALF_PI):
        raise DomainError("angle outside the [-pi/2, pi/2] coverage sector")
    return t


def steering_vector(theta: float, n: int) -> np.ndarray:
    """Narrowband response of an ``n``-element half-wavelength ULA.

    Entry ``i`` (0-based) is ``exp(j pi i sin(theta))``.
    """
    t = float(_check_angle(theta))
    if n < 1:
        raise ConfigError("antenna count must be >= 1")
    return np.exp(1j * math.pi * np.arange(n) * math.sin(t))


def rainbow_combiner(b: int, cfg: ArrayConfig) -> np.ndarray:
    """Equivalent analog combiner of subcarrier ``b``: ``exp(j 2 pi b i / B)``."""
    if not 0 <= b < cfg.n_sc:
        raise IndexError(f"subcarrier {b} outside [0, {cfg.n_sc})")
    return np.exp(2j * math.pi * b * np.arange(cfg.n_bs) / cfg.n_sc)


def fejer_kernel(n: int, x):
    """Fejer kernel ``F_n(x) = |sin(n x / 2) / sin(x / 2)|^2``.

    Works elementwise on arrays. Where ``|sin(x/2)| < 1e-12`` the removable
    singularity is replaced by its second-order series around ``2 pi m``,
    which is ``n**2`` to machine precision.
    """
    if n < 1:
        raise ConfigError("kernel order must be >= 1")
    x = np.asarray(x, dtype=float)
    half = np.sin(x / 2)
    singular = np.abs(half) < _SINGULAR_EPS
    safe = np.where(singular, 1.0, half)
    out = (np.sin(n * x / 2) / safe) ** 2
    if np.any(singular):
        eps = x - 2 * math.pi * np.round(x / (2 * math.pi))
        limit = n * n * (1.0 - (n * n - 1) * eps * eps / 12.0)
        out = np.where(singular, limit, out)
    return out[()] if out.ndim == 0 else out


def dirichlet_kernel(n: int, x):
    """Signed amplitude ``sin(n x / 2) / sin(x / 2)`` with its limits filled in."""
    x = np.asarray(x, dtype=float)
    half = np.sin(x / 2)
    singular = np.abs(half) < _SINGULAR_EPS
    safe = np.where(singular, 1.0, half)
    out = np.sin(n * x / 2) / safe
    if np.any(singular):
        m = np.round(x / (2 * math.pi))
        sign = np.where((m * (n - 1)) % 2 == 0, 1.0, -1.0)
        out = np.where(singular, n * sign, out)
    return out[()] if out.ndim == 0 else out


def beam_gain(theta, b, cfg: ArrayConfig):
    """Power gain ``|a(theta)^H w_b|^2`` of subcarrier ``b`` toward ``theta``.

    Broadcasts over array-valued ``theta`` and ``b``. The peak value is
    ``n_bs**2`` where ``2 b = B sin(theta)``.
    """
    t = _check_angle(theta)
    b = np.asarray(b, dtype=float)
    x = math.pi * (2 * b - cfg.n_sc * np.sin(t)) / cfg.n_sc
    return fejer_kernel(cfg.n_bs, x)


def beam_gain_direct(theta: float, b: int, cfg: ArrayConfig) -> float:
    """Same quantity as :func:`beam_gain`, from the explicit inner product."""
    return float(abs(np.vdot(steering_vector(theta, cfg.n_bs), rainbow_combiner(b, cfg))) ** 2)


def anchor_subcarriers(theta, cfg: ArrayConfig) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`anchor_subcarrier`.

    Returns
    -------
    anchor : ndarray of int
        Anchor indices wrapped into ``[0, B)``.
    zeta : ndarray of float
        Offsets ``2 b* - B sin(theta)`` computed before wrapping.
    """
    t = np.atleast_1d(_check_angle(theta))
    half_pos = cfg.n_sc * np.sin(t) / 2
    lo = np.floor(half_pos)
    frac = half_pos - lo
    unwrapped = np.where(frac > 0.5, lo + 1, lo)
    tie = frac == 0.5
    if np.any(tie):
        # equal gain on both neighbours: keep the smaller wrapped index
        a = np.mod(lo, cfg.n_sc)
        c = np.mod(lo + 1, cfg.n_sc)
        unwrapped = np.where(tie & (c < a), lo + 1, unwrapped)
    zeta = 2 * unwrapped - 2 * half_pos
    anchor = np.mod(unwrapped, cfg.n_sc).astype(np.int64)
    return anchor, zeta


def anchor_subcarrier(theta: float, cfg: ArrayConfig) -> AnchorInfo:
    """Subcarrier whose rainbow direction is closest to ``theta``.

    ``b* = round(B sin(theta) / 2)`` wrapped into ``[0, B)``; on an exact
    tie (``zeta = +-1``) the lower wrapped index wins.
    """
    anchor, zeta = anchor_subcarriers(theta, cfg)
    return AnchorInfo(int(anchor[0]), float(zeta[0]))


def usable_band(anchor: AnchorInfo | int, width: int, cfg: ArrayConfig) -> np.ndarray:
    """Contiguous narrowband of ``width`` subcarriers centred on the anchor.

    The band is ``[b* - width/2, b* + width/2 - 1]`` taken modulo ``B``, so the
    anchor sits at position ``width/2`` and the band never shrinks at the
    spectrum edges.
    """
    b_star = anchor.anchor_sc if isinstance(anchor, AnchorInfo) else int(anchor)
    if width > cfg.n_sc:
        raise ConfigError(f"band width {width} exceeds the {cfg.n_sc} available subcarriers")
    if width < 1 or width % 2:
        raise ConfigError(f"band width must be a positive even number, got {width}")
    return np.mod(b_star - width // 2 + np.arange(width), cfg.n_sc)


def _check_zeta(zeta) -> None:
    if np.any(np.abs(np.asarray(zeta, dtype=float)) > 1.0):
        raise DomainError("zeta must lie in [-1, 1]")


def gain_ratio_eta(zeta: float, b: float, cfg: ArrayConfig) -> float:
    """Gain of the anchor over the gain ``b`` subcarriers away.

    Returns ``inf`` when the offset subcarrier sits exactly on a null.
    """
    _check_zeta(zeta)
    n, big_b = cfg.n_bs, cfg.n_sc
    x_off = math.pi * (zeta + 2 * b) / big_b
    if abs(math.sin(x_off / 2)) >= _SINGULAR_EPS and abs(math.sin(n * x_off / 2)) < _SINGULAR_EPS:
        return math.inf
    return float(fejer_kernel(n, math.pi * zeta / big_b) / fejer_kernel(n, x_off))


def delta_gain(
    zeta,
    k,
    cfg: ArrayConfig,
    mode: Literal["exact", "quadratic"] = "exact",
):
    """Gain difference between the anchor and the subcarrier ``k`` away.

    ``exact`` returns ``F(pi zeta / B) - F(pi (zeta + 2k) / B)``, positive when
    the offset subcarrier is farther from the beam peak. ``quadratic`` is the
    small-angle expansion ``(N^4 pi^2 / (12 B^2)) (4 k zeta + 4 k^2)``; it
    carries an ``N^2 / (N^2 - 1)`` bias, so it is only a reproduction aid.
    """
    _check_zeta(zeta)
    zeta = np.asarray(zeta, dtype=float)
    k = np.asarray(k, dtype=float)
    n, big_b = cfg.n_bs, cfg.n_sc
    if mode == "exact":
        out = fejer_kernel(n, math.pi * zeta / big_b) - fejer_kernel(n, math.pi * (zeta + 2 * k) / big_b)
    elif mode == "quadratic":
        coef = 2 * n**4 * math.pi**2 / (math.gamma(5) * big_b**2)
        out = coef * (4 * k * zeta + 4 * k * k)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


def _ratio(b1: float, b2: float, cfg: ArrayConfig) -> complex:
    n, big_b = cfg.n_bs, cfg.n_sc
    num_sin = math.sin(math.pi * b2 * n / big_b)
    den_sin = math.sin(math.pi * b1 * n / big_b)
    s1 = math.sin(math.pi * b1 / big_b)
    s2 = math.sin(math.pi * b2 / big_b)
    if abs(den_sin) < _SINGULAR_EPS or abs(s2) < _SINGULAR_EPS or abs(s1) < _SINGULAR_EPS:
        return complex(math.inf, 0.0)
    phase = math.pi * (b2 - b1) * (n - 1) / big_b
    return (num_sin / den_sin) * (s1 / s2) * complex(math.cos(phase), math.sin(phase))


def sic_residual_ratio(b1: float, b2: float, zeta: float, cfg: ArrayConfig) -> tuple[complex, complex, float]:
    """Amplitude ratio used to cancel a replica during SIC, and its error.

    A packet decoded on subcarrier ``b* + b1`` is cancelled on ``b* + b2``.
    The base station only knows the anchor, so it scales the replica by
    ``(w_{b*}^H w_{b*+b2}) / (w_{b*}^H w_{b*+b1})``; the true factor uses the
    user's actual direction, i.e. both offsets shifted by ``zeta / 2``.

    Returns
    -------
    estimated, true_value : complex
        Closed-form ratios; ``inf`` if a sine denominator vanishes.
    error_magnitude : float
        ``|estimated - true_value|``.
    """
    if b1 == 0 or b2 == 0:
        raise DomainError("subcarrier offsets must be nonzero")
    _check_zeta(zeta)
    estimated = _ratio(b1, b2, cfg)
    true_value = _ratio(b1 + zeta / 2, b2 + zeta / 2, cfg)
    if math.isinf(estimated.real) or math.isinf(true_value.real):
        return estimated, true_value, math.inf
    return estimated, true_value, abs(estimated - true_value)
