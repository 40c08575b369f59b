"""Narrowband DL synchronization through a rainbow beam.

A user observes only its ``|B_u|`` subcarriers around the anchor. Each
subcarrier arrives through a different beam direction, so the band sees the
amplitude taper of the array pattern across it. The delay taps also add a
phase ramp ``exp(j pi (N-1) b / B)`` across subcarriers. That ramp is a known
constant group delay of the array and is removed before estimation, leaving
only the amplitude taper as distortion.

SNR convention: ``snr_db`` is the per-subcarrier SNR at peak beam gain. With
the DL power spread evenly over all ``B`` subcarriers and noise measured over
the full band, this equals the broadband SNR of the link budget. Noise is
unit-variance complex Gaussian per subcarrier and symbol, and the signal is
scaled by ``sqrt(10**(snr_db/10))``.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .beam import ArrayConfig, dirichlet_kernel
from .errors import ConfigError, DomainError
from .linkchan import PathComponent, sample_path_arrays
from .parallel import map_shards
from .seeding import as_rng, child_rng, shard_sizes

# narrowband CP as a fraction of the symbol: 256 of 2048 samples
CP_FRACTION = 256 / 2048
GRID_STEP = 0.25
SUCCESS_TOL = 0.5
MC_SHARD = 500


@dataclass(frozen=True)
class PreambleSpec:
    """DL preamble of ``n_symbols`` OFDM symbols on ``band_size`` subcarriers."""

    n_symbols: int = 22
    band_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_symbols < 1:
            raise ConfigError("n_symbols must be at least 1")
        if self.band_size < 2:
            raise ConfigError("band_size must be at least 2")

    @property
    def cp_samples(self) -> float:
        return self.band_size * CP_FRACTION


@dataclass(frozen=True)
class SyncObservation:
    """Received narrowband preamble and the ground truth used to create it."""

    rx_symbols: np.ndarray
    true_offset: float
    snr_db: float
    theta: float


def gen_pn_preamble(preamble: PreambleSpec) -> np.ndarray:
    """BPSK pseudo-noise preamble of shape ``(band_size, n_symbols)``."""
    rng = child_rng(preamble.seed, 0)
    bits = rng.integers(0, 2, size=(preamble.band_size, preamble.n_symbols))
    return (1.0 - 2.0 * bits).astype(complex)


def _band_offsets(band_size: int) -> np.ndarray:
    return np.arange(band_size) - band_size // 2


def band_response(theta, band_size: int, cfg: ArrayConfig, distortion: bool = True,
                  aod=None, gain=None, delay_s=None) -> np.ndarray:
    """Normalized channel across the user's band, group delay removed.

    Parameters
    ----------
    theta : float or array_like
        LoS angle of each user; it fixes the anchor and the band.
    band_size : int
        Subcarriers observed.
    cfg : ArrayConfig
    distortion : bool
        If false, every path sees the flat peak gain instead of the array
        pattern.
    aod, gain, delay_s : array_like, optional
        Path parameters of shape ``(users, paths)``. Default is LoS only.

    Returns
    -------
    ndarray
        Shape ``(users, band_size)``; the LoS path at its own peak is 1.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(np.abs(theta) > math.pi / 2):
        raise DomainError("theta outside [-pi/2, pi/2]")
    if band_size > cfg.n_sc:
        raise DomainError("band larger than the number of subcarriers")
    if aod is None:
        aod = theta[:, None]
        gain = np.ones_like(aod, dtype=complex)
        delay_s = np.zeros_like(aod)
    aod = np.asarray(aod, dtype=float)
    gain = np.asarray(gain, dtype=complex)
    delay_s = np.asarray(delay_s, dtype=float)
    big_b, n = cfg.n_sc, cfg.n_bs
    # signed subcarrier index of every band position; the anchor is unwrapped
    anchor = np.floor(big_b * np.sin(theta) / 2 + 0.5)
    b = anchor[:, None] + _band_offsets(band_size)[None, :]
    if distortion:
        x = math.pi * (2 * b[:, :, None] - big_b * np.sin(aod)[:, None, :]) / big_b
        pattern = dirichlet_kernel(n, x) / n
    else:
        pattern = np.ones(b.shape + (aod.shape[1],))
    phase = np.exp(2j * math.pi * b[:, :, None] * delay_s[:, None, :] * cfg.bandwidth_hz / big_b)
    return np.sum(gain[:, None, :] * pattern * phase, axis=2)


def _offset_ramp(d_u, band_size: int) -> np.ndarray:
    d_u = np.atleast_1d(np.asarray(d_u, dtype=float))
    local = np.arange(band_size)
    return np.exp(-2j * math.pi * local[None, :] * d_u[:, None] / band_size)


def apply_dl_channel(
    preamble: np.ndarray,
    theta: float,
    d_u: float,
    snr_db: float,
    cfg: ArrayConfig,
    paths: Sequence[PathComponent] | None = None,
    distortion: bool = True,
    rng=None,
) -> SyncObservation:
    """Pass a preamble through the beam, the timing offset and AWGN.

    ``snr_db = inf`` gives a noiseless observation with unit signal scale.
    ``paths`` overrides the default LoS-only channel; its first entry should
    be the LoS path at ``theta``.
    """
    band_size = preamble.shape[0]
    if paths:
        aod = np.array([[p.aod for p in paths]])
        gain = np.array([[p.gain for p in paths]])
        delay = np.array([[p.delay_s for p in paths]])
        h = band_response(theta, band_size, cfg, distortion, aod, gain, delay)[0]
    else:
        h = band_response(theta, band_size, cfg, distortion)[0]
    h = h * _offset_ramp(d_u, band_size)[0]
    rx = h[:, None] * preamble
    if math.isinf(snr_db) and snr_db > 0:
        return SyncObservation(rx, float(d_u), float(snr_db), float(theta))
    if rng is None:
        raise DomainError("finite SNR needs an rng")
    rng = as_rng(rng)
    scale = 0.0 if math.isinf(snr_db) else math.sqrt(10 ** (snr_db / 10))
    rx = scale * rx + _cn(rng, rx.shape)
    return SyncObservation(rx, float(d_u), float(snr_db), float(theta))


def _cn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    scale = math.sqrt(var / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def timing_grid(band_size: int, cp_samples: float | None = None, step: float = GRID_STEP) -> np.ndarray:
    """Candidate offsets ``[0, band_size + cp)`` at ``step`` resolution."""
    cp = band_size * CP_FRACTION if cp_samples is None else cp_samples
    return np.arange(0.0, band_size + cp, step)


def _timing_from_correlation(c: np.ndarray, grid: np.ndarray) -> np.ndarray:
    band_size = c.shape[-1]
    steer = np.exp(2j * math.pi * np.arange(band_size)[:, None] * grid[None, :] / band_size)
    metric = np.abs(c @ steer) ** 2
    return grid[np.argmax(metric, axis=-1)]


def estimate_timing(obs: SyncObservation | np.ndarray, reference: np.ndarray,
                    cp_samples: float | None = None, step: float = GRID_STEP) -> float:
    """Grid-search timing estimate maximizing the preamble correlation.

    The metric is ``|sum_b c_b exp(j 2 pi b D / |B_u|)|^2`` with
    ``c_b = sum_m rx[b, m] conj(s[b, m])``, which peaks at the true offset.
    Ties go to the smallest candidate.
    """
    rx = obs.rx_symbols if isinstance(obs, SyncObservation) else np.asarray(obs)
    if rx.shape != reference.shape:
        raise DomainError("observation and reference shapes differ")
    c = np.sum(rx * np.conj(reference), axis=1)
    return float(_timing_from_correlation(c[None, :], timing_grid(rx.shape[0], cp_samples, step))[0])


def circular_error(estimate, truth, band_size: int):
    """Timing error modulo the band, mapped to ``[-band/2, band/2)``."""
    return np.mod(np.asarray(estimate) - np.asarray(truth) + band_size / 2, band_size) - band_size / 2


def power_scan(theta: float, cfg: ArrayConfig, snr_db: float, rng, n_avg: int = 1,
               candidates=None) -> np.ndarray:
    """Noisy received power on each candidate subcarrier.

    Power is ``|sqrt(snr) F / N + n|^2`` averaged over ``n_avg`` symbols, with
    the signed array amplitude normalized to 1 at the peak.
    """
    cand = np.arange(cfg.n_sc) if candidates is None else np.asarray(candidates)
    x = math.pi * (2 * cand - cfg.n_sc * math.sin(theta)) / cfg.n_sc
    amp = dirichlet_kernel(cfg.n_bs, x) / cfg.n_bs
    if math.isinf(snr_db) and snr_db > 0:
        return np.abs(amp) ** 2
    rng = as_rng(rng)
    scale = 0.0 if math.isinf(snr_db) else math.sqrt(10 ** (snr_db / 10))
    sig = scale * amp
    noisy = sig[None, :] + _cn(rng, (n_avg, cand.size))
    return np.mean(np.abs(noisy) ** 2, axis=0)


def identify_anchor(power, candidates=None) -> int:
    """Candidate with the strongest measured power; ties go to the lower index."""
    power = np.asarray(power)
    idx = int(np.argmax(power))
    return idx if candidates is None else int(np.asarray(candidates)[idx])


def _detection_shard(task):
    (seed, shard, trials, snrs, preamble, cfg, distortion, n_paths, step, tol) = task
    rng = child_rng(seed, shard)
    band = preamble.band_size
    theta = rng.uniform(-math.pi / 2, math.pi / 2, trials)
    d_u = rng.uniform(0.0, band, trials)
    aod, gain, delay = sample_path_arrays(theta, n_paths, rng)
    h = band_response(theta, band, cfg, distortion, aod, gain, delay) * _offset_ramp(d_u, band)
    # sum_m n[b,m] conj(s[b,m]) with |s| = 1 is exactly CN(0, L) per subcarrier
    noise = _cn(rng, (trials, band), var=preamble.n_symbols)
    grid = timing_grid(band, preamble.cp_samples, step)
    hits = []
    for snr_db in snrs:
        c = math.sqrt(10 ** (snr_db / 10)) * preamble.n_symbols * h + noise
        err = circular_error(_timing_from_correlation(c, grid), d_u, band)
        hits.append(int(np.count_nonzero(np.abs(err) <= tol)))
    return np.array(hits, dtype=np.int64)


@dataclass(frozen=True)
class DetectionPoint:
    snr_db: float
    band_size: int
    n_symbols: int
    distortion: bool
    n_paths: int
    trials: int
    p_detect: float
    stderr: float


def sync_detection_mc(
    snr_db: Sequence[float],
    preamble: PreambleSpec,
    cfg: ArrayConfig,
    distortion: bool,
    n_paths: int,
    trials: int,
    rng_seed: int,
    workers: int = 1,
    step: float = GRID_STEP,
    tol: float = SUCCESS_TOL,
) -> list[DetectionPoint]:
    """Probability of timing within ``tol`` samples, per SNR point.

    Every trial draws an angle, an offset uniform over the band, a multipath
    channel and a noise realization. The same draws are reused at every SNR
    point and for either distortion setting under one seed, so curves are
    directly comparable. The preamble is the fixed sequence of ``preamble``; it
    enters only through the correlation, where the noise statistic is drawn
    directly.
    """
    if trials < 100:
        raise DomainError("trials must be at least 100")
    snrs = [float(s) for s in snr_db]
    tasks = [
        (rng_seed, k, t, snrs, preamble, cfg, bool(distortion), n_paths, step, tol)
        for k, t in enumerate(shard_sizes(trials, MC_SHARD))
    ]
    hits = sum(map_shards(_detection_shard, tasks, workers))
    out = []
    for s, h in zip(snrs, hits):
        p = h / trials
        out.append(DetectionPoint(s, preamble.band_size, preamble.n_symbols, bool(distortion), n_paths,
                                  trials, p, math.sqrt(p * (1 - p) / trials)))
    return out


DETECTION_COLUMNS = ("snr_db", "band_size", "L", "distortion", "n_paths", "trials", "p_detect", "stderr")


def write_detection_csv(path, points: Sequence[DetectionPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETECTION_COLUMNS)
        for p in points:
            w.writerow([f"{p.snr_db:.9g}", p.band_size, p.n_symbols, int(p.distortion), p.n_paths,
                        p.trials, f"{p.p_detect:.9g}", f"{p.stderr:.9g}"])


def snr_at_detection(points: Sequence[DetectionPoint], target: float = 0.9) -> float:
    """Linearly interpolated SNR where the curve first reaches ``target``.

    Returns ``nan`` if the curve never gets there.
    """
    snr = np.array([p.snr_db for p in points])
    pd = np.array([p.p_detect for p in points])
    above = np.nonzero(pd >= target)[0]
    if above.size == 0:
        return math.nan
    i = int(above[0])
    if i == 0:
        return float(snr[0])
    return float(snr[i - 1] + (target - pd[i - 1]) * (snr[i] - snr[i - 1]) / (pd[i] - pd[i - 1]))


@dataclass(frozen=True)
class DetectionTable:
    """Detection probability versus SNR, interpolated linearly and clamped."""

    snr_db: tuple[float, ...]
    p_detect: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.snr_db) != len(self.p_detect) or len(self.snr_db) < 1:
            raise ConfigError("table needs matching, nonempty columns")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ConfigError("table SNRs must increase")
        if any(not 0 <= p <= 1 for p in self.p_detect):
            raise ConfigError("table probabilities must lie in [0, 1]")

    @classmethod
    def from_points(cls, points: Sequence[DetectionPoint]) -> DetectionTable:
        pts = sorted(points, key=lambda p: p.snr_db)
        return cls(tuple(p.snr_db for p in pts), tuple(p.p_detect for p in pts))

    @classmethod
    def from_csv(cls, path) -> DetectionTable:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        rows.sort(key=lambda r: float(r["snr_db"]))
        return cls(tuple(float(r["snr_db"]) for r in rows), tuple(float(r["p_detect"]) for r in rows))

    def __call__(self, snr_db):
        return np.interp(snr_db, self.snr_db, self.p_detect)
