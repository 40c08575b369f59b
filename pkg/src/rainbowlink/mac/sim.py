"""Frame-level simulation of grant-free access over the rainbow beam.

Timeline of one frame ``f`` covering ``[f F, (f + 1) F)``:

1. users that arrived before the frame start try to synchronize on the DL
   reference; a failure costs one frame;
2. every synchronized user with a pending packet transmits ``n`` replicas
   on random RBs of its band in the UL half; a loss costs one frame;
3. packets arriving during the frame wait for the next DL broadcast.

Latency of a delivered packet is ``t_sync + t_cont`` with
``t_sync = t_activation + t_failure + t_dl`` and
``t_cont = t_packetloss + t_dl``.

Random streams are keyed by ``(frame, purpose)`` under the master seed, so
arrivals do not depend on the decoder or on how many users contend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..analysis import PlrParams, optimal_repetitions
from ..beam import AnchorInfo, ArrayConfig, anchor_subcarriers
from ..errors import ConfigError
from ..linkchan import LinkBudget, dl_snr, sample_positions
from ..seeding import child_rng
from ..sync import DetectionTable
from .frame import FrameDesign, Numerology
from .metrics import effective_rate
from .sic import collision_decode, peel_edges

ARRIVALS, SYNC, CONTENTION = 0, 1, 2
BAND_SC = 32


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    ``k_rb`` defaults to ``32 // grouping`` (a 32-subcarrier band) and
    ``n_rep`` to the loss-minimizing repetition count at the mean load
    ``pool_size * p``.
    """

    numerology: Numerology = Numerology()
    frame_design: FrameDesign = FrameDesign()
    array: ArrayConfig = ArrayConfig()
    budget: LinkBudget = LinkBudget()
    pool_size: int = 1000
    activation_prob: float = 0.03
    grouping: int = 2
    k_rb: int | None = None
    n_rep: int | None = None
    decode_mode: Literal["collision", "sic"] = "collision"
    sync_model: Literal["ideal", "snr_table", "phased"] = "ideal"
    sync_table: DetectionTable | None = None
    phased_beams: int = 64
    phased_sectors_per_frame: int = 8
    radius_m: float = 400.0
    n_frames: int = 1000
    warmup_frames: int = 50
    drain_frames: int = 64
    rng_seed: int = 0
    _n_resolved: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0 <= self.activation_prob <= 1:
            raise ConfigError("activation_prob must lie in [0, 1]")
        if self.grouping < 1 or self.array.n_sc % self.grouping:
            raise ConfigError("grouping must divide the subcarrier count")
        if self.k_rb is not None and not 1 <= self.k_rb <= self.n_rb:
            raise ConfigError("k_rb outside [1, n_rb]")
        if self.n_rep is not None and not 1 <= self.n_rep <= self.k:
            raise ConfigError("n_rep must lie in [1, k_rb]")
        if self.decode_mode not in ("collision", "sic"):
            raise ConfigError(f"unknown decode_mode {self.decode_mode!r}")
        if self.sync_model not in ("ideal", "snr_table", "phased"):
            raise ConfigError(f"unknown sync_model {self.sync_model!r}")
        if self.sync_model == "snr_table" and self.sync_table is None:
            raise ConfigError("sync_model=snr_table needs a detection table")
        if not 1 <= self.phased_sectors_per_frame <= self.phased_beams:
            raise ConfigError("phased sectors must lie in [1, phased_beams]")
        if self.pool_size < 0 or self.n_frames < 0 or self.warmup_frames < 0 or self.drain_frames < 0:
            raise ConfigError("counts must be nonnegative")
        if self.radius_m <= 0:
            raise ConfigError("radius must be positive")
        n = self.n_rep if self.n_rep is not None else self._default_n()
        object.__setattr__(self, "_n_resolved", n)

    @property
    def n_rb(self) -> int:
        return self.array.n_sc // self.grouping

    @property
    def k(self) -> int:
        return self.k_rb if self.k_rb is not None else max(1, BAND_SC // self.grouping)

    @property
    def n(self) -> int:
        return self._n_resolved

    def _default_n(self) -> int:
        u = max(2, round(self.pool_size * self.activation_prob))
        try:
            return optimal_repetitions(PlrParams(self.n_rb, self.k, u, 1, self.grouping))
        except ConfigError:
            return 1


@dataclass
class UserState:
    """One user with a single pending packet."""

    id: int
    theta: float
    snr_db: float
    anchor: AnchorInfo
    band: np.ndarray
    arrival_time_us: float
    state: Literal["unsynced", "synced", "done"] = "unsynced"
    sync_attempts: int = 0
    contention_attempts: int = 0
    completion_time_us: float = math.nan

    _ORDER = {"unsynced": 0, "synced": 1, "done": 2}

    def advance(self, new_state: str) -> None:
        if self._ORDER[new_state] != self._ORDER[self.state] + 1:
            raise ValueError(f"illegal transition {self.state} -> {new_state}")
        self.state = new_state


@dataclass(frozen=True)
class LatencyRecord:
    """Latency components of one delivered packet, in microseconds."""

    t_activation_us: float
    t_failure_us: float
    t_dl_us: float
    t_packetloss_us: float
    t_sync_us: float
    t_cont_us: float
    t_total_us: float

    @classmethod
    def from_components(cls, t_activation_us: float, t_failure_us: float, t_dl_us: float,
                        t_packetloss_us: float) -> LatencyRecord:
        t_sync = t_activation_us + t_failure_us + t_dl_us
        t_cont = t_packetloss_us + t_dl_us
        return cls(t_activation_us, t_failure_us, t_dl_us, t_packetloss_us, t_sync, t_cont, t_sync + t_cont)


def first_rb(anchor_sc, cfg: SimConfig):
    """First RB of the band centred on each anchor subcarrier."""
    start = np.asarray(anchor_sc) - (cfg.k * cfg.grouping) // 2
    return np.mod(np.floor_divide(start, cfg.grouping), cfg.n_rb)


def _draw_arrivals(cfg: SimConfig, frame: int):
    rng = child_rng(cfg.rng_seed, frame, ARRIVALS)
    m = int(rng.binomial(cfg.pool_size, cfg.activation_prob))
    r, theta = sample_positions(cfg.radius_m, m, rng)
    offset = rng.uniform(0.0, cfg.frame_design.frame_us, m)
    snr = dl_snr(np.maximum(r, 1.0), cfg.budget) if m else np.zeros(0)
    anchor, zeta = anchor_subcarriers(theta, cfg.array) if m else (np.zeros(0, np.int64), np.zeros(0))
    arrival = frame * cfg.frame_design.frame_us + offset
    return theta, np.atleast_1d(snr), anchor, zeta, arrival, cfg.frame_design.frame_us - offset


def activate_users(cfg: SimConfig, frame: int, rng=None, first_id: int = 0) -> list[UserState]:
    """New users of ``frame``; the draw comes from the frame's arrival stream.

    ``rng`` is accepted for interface symmetry and ignored: arrivals are
    keyed by ``(rng_seed, frame)`` so that they are reproducible in isolation.
    """
    theta, snr, anchor, zeta, arrival, _ = _draw_arrivals(cfg, frame)
    start = first_rb(anchor, cfg)
    out = []
    for i in range(theta.size):
        band = np.mod(start[i] + np.arange(cfg.k), cfg.n_rb)
        out.append(UserState(first_id + i, float(theta[i]), float(snr[i]),
                             AnchorInfo(int(anchor[i]), float(zeta[i])), band, float(arrival[i])))
    return out


def _sync_success(snr, theta, cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    m = len(snr)
    if cfg.sync_model == "ideal":
        return np.ones(m, dtype=bool)
    if cfg.sync_model == "snr_table":
        if cfg.sync_table is None:
            raise ConfigError("sync_model=snr_table needs a detection table")
        return rng.random(m) < cfg.sync_table(np.asarray(snr))
    # phased-array reconstruction: the BS lights a few random sectors per frame
    lit = rng.choice(cfg.phased_beams, size=cfg.phased_sectors_per_frame, replace=False)
    sector = np.clip(((np.sin(theta) + 1) / 2 * cfg.phased_beams).astype(np.int64), 0, cfg.phased_beams - 1)
    return np.isin(sector, lit)


def attempt_sync(user: UserState, cfg: SimConfig, rng) -> bool:
    """One synchronization attempt; moves the user to ``synced`` on success."""
    if user.state != "unsynced":
        raise ValueError("user already synchronized")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    user.sync_attempts += 1
    ok = bool(_sync_success([user.snr_db], np.array([user.theta]), cfg, rng)[0])
    if ok:
        user.advance("synced")
    return ok


def _pick_rbs(start: np.ndarray, cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    keys = rng.random((start.size, cfg.k))
    n = cfg.n
    picks = np.argpartition(keys, n - 1, axis=1)[:, :n] if n < cfg.k else np.broadcast_to(
        np.arange(cfg.k), (start.size, cfg.k))
    return np.mod(start[:, None] + picks, cfg.n_rb)


def _contend(start: np.ndarray, cfg: SimConfig, rng: np.random.Generator):
    m = start.size
    if m == 0:
        return np.zeros(0, dtype=bool), 0
    rbs = _pick_rbs(start, cfg, rng)
    users = np.repeat(np.arange(m), rbs.shape[1])
    flat = rbs.ravel()
    if cfg.decode_mode == "sic":
        ok = peel_edges(users, flat, m, cfg.n_rb)
    else:
        ok = collision_decode(users, flat, m, cfg.n_rb)
    return ok, int(np.unique(flat).size)


def contend_frame(users: list[UserState], cfg: SimConfig, rng) -> set[int]:
    """Ids of users whose packet is decoded in this frame."""
    if any(u.state != "synced" for u in users):
        raise ValueError("only synchronized users contend")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    start = np.array([int(u.band[0]) for u in users], dtype=np.int64)
    ok, _ = _contend(start, cfg, rng)
    for u in users:
        u.contention_attempts += 1
    return {u.id for u, good in zip(users, ok) if good}


@dataclass
class FrameStats:
    frame: int
    arrivals: int
    contenders: int
    successes: int
    occupied_rbs: int
    throughput_symbols: int


@dataclass
class SimResult:
    """Output of :func:`run_simulation`.

    ``records`` holds delivered packets that arrived inside the measurement
    window; ``censored`` counts window packets still pending at the end.
    """

    config: SimConfig
    records: list[LatencyRecord]
    frames: list[FrameStats]
    censored: int
    total_arrivals: int
    in_flight_end: int
    completed: int = 0
    conservation_ok: bool = True
    latencies_us: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def t_cont_us(self) -> np.ndarray:
        return np.array([r.t_cont_us for r in self.records])


class _Pool:
    """Struct-of-arrays store of in-flight users."""

    cols = ("t_act", "theta", "snr", "start", "sync_fail", "cont_fail", "synced", "tracked")

    def __init__(self) -> None:
        self.t_act = np.zeros(0)
        self.theta = np.zeros(0)
        self.snr = np.zeros(0)
        self.start = np.zeros(0, np.int64)
        self.sync_fail = np.zeros(0, np.int64)
        self.cont_fail = np.zeros(0, np.int64)
        self.synced = np.zeros(0, bool)
        self.tracked = np.zeros(0, bool)

    def __len__(self) -> int:
        return self.t_act.size

    def add(self, **new) -> None:
        for c in self.cols:
            setattr(self, c, np.concatenate([getattr(self, c), new[c]]))

    def keep(self, mask: np.ndarray) -> None:
        for c in self.cols:
            setattr(self, c, getattr(self, c)[mask])


def run_simulation(cfg: SimConfig) -> SimResult:
    """Run warm-up, measurement and drain frames.

    Packets arriving in the ``n_frames`` measurement frames after the warm-up
    are tracked. Arrivals continue during ``drain_frames`` extra frames to
    keep the load steady while tracked packets finish; tracked packets still
    pending afterwards are censored.
    """
    fd = cfg.frame_design
    frame_us, t_dl = fd.frame_us, fd.t_dl_us
    payload = cfg.grouping * fd.ul_payload_symbols
    first_tracked, end_tracked = cfg.warmup_frames, cfg.warmup_frames + cfg.n_frames
    horizon = end_tracked + cfg.drain_frames
    pool = _Pool()
    records: list[tuple[np.ndarray, ...]] = []
    frames: list[FrameStats] = []
    arrived = completed = 0
    conservation_ok = True
    for f in range(horizon):
        # 1. synchronization on this frame's DL
        waiting = np.flatnonzero(~pool.synced)
        if waiting.size:
            ok = _sync_success(pool.snr[waiting], pool.theta[waiting], cfg, child_rng(cfg.rng_seed, f, SYNC))
            pool.synced[waiting[ok]] = True
            pool.sync_fail[waiting[~ok]] += 1
        # 2. contention in this frame's UL
        cont = np.flatnonzero(pool.synced)
        ok, occupied = _contend(pool.start[cont], cfg, child_rng(cfg.rng_seed, f, CONTENTION))
        winners = cont[ok]
        pool.cont_fail[cont[~ok]] += 1
        if winners.size:
            done_tracked = winners[pool.tracked[winners]]
            if done_tracked.size:
                records.append((pool.t_act[done_tracked], pool.sync_fail[done_tracked] * frame_us,
                                pool.cont_fail[done_tracked] * frame_us))
            keep = np.ones(len(pool), dtype=bool)
            keep[winners] = False
            pool.keep(keep)
            completed += int(winners.size)
        # 3. arrivals during this frame
        theta, snr, anchor, _, _, t_act = _draw_arrivals(cfg, f)
        arrivals_now = theta.size
        if arrivals_now:
            pool.add(t_act=t_act, theta=theta, snr=snr, start=first_rb(anchor, cfg).astype(np.int64),
                     sync_fail=np.zeros(arrivals_now, np.int64), cont_fail=np.zeros(arrivals_now, np.int64),
                     synced=np.zeros(arrivals_now, bool),
                     tracked=np.full(arrivals_now, first_tracked <= f < end_tracked))
        arrived += arrivals_now
        conservation_ok &= arrived == completed + len(pool)
        if first_tracked <= f < end_tracked:
            frames.append(FrameStats(f, arrivals_now, int(cont.size), int(winners.size), occupied,
                                     int(winners.size) * payload))
    recs = _materialize(records, t_dl)
    censored = int(np.count_nonzero(pool.tracked))
    lat = np.array([r.t_total_us for r in recs])
    return SimResult(cfg, recs, frames, censored, arrived, len(pool), completed, bool(conservation_ok), lat)


def _materialize(parts, t_dl: float) -> list[LatencyRecord]:
    out: list[LatencyRecord] = []
    for t_act, t_fail, t_loss in parts:
        for a, b, c in zip(t_act.tolist(), t_fail.tolist(), t_loss.tolist()):
            out.append(LatencyRecord.from_components(a, float(b), t_dl, float(c)))
    return out


def summarize(result: SimResult, threshold_us: float = 1000.0) -> dict[str, float]:
    """Headline numbers of a run."""
    from .metrics import latency_quantile, reliability

    cfg = result.config
    lat = result.latencies_us
    t_cont = result.t_cont_us
    n_frames = max(len(result.frames), 1)
    delivered = sum(f.throughput_symbols for f in result.frames)
    return {
        "p": cfg.activation_prob,
        "G": cfg.grouping,
        "K": cfg.k,
        "n": cfg.n,
        "mean_latency": float(lat.mean()) if lat.size else math.nan,
        "p99999_latency": latency_quantile(lat, 0.99999, result.censored),
        "reliability_at_1ms": reliability(lat, threshold_us, result.censored),
        "mean_reff": float(np.mean(effective_rate(t_cont, cfg.grouping, cfg.frame_design.ul_payload_symbols)))
        if t_cont.size else math.nan,
        "aggregate_throughput": delivered / (n_frames * cfg.frame_design.frame_us * 1e-6),
    }
