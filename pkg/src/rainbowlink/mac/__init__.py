"""Grant-free MAC: frame layout, simulation, decoding and metrics."""

from .backoff import BackoffResult, backoff_experiment
from .frame import FrameDesign, Numerology, frame_fill
from .metrics import (
    density,
    effective_bit_rate,
    effective_rate,
    latency_ccdf,
    latency_quantile,
    reliability,
)
from .sic import collision_decode, peel_edges, sic_peel
from .sim import (
    FrameStats,
    LatencyRecord,
    SimConfig,
    SimResult,
    UserState,
    activate_users,
    attempt_sync,
    contend_frame,
    first_rb,
    run_simulation,
    summarize,
)

__all__ = [
    "BackoffResult",
    "FrameDesign",
    "FrameStats",
    "LatencyRecord",
    "Numerology",
    "SimConfig",
    "SimResult",
    "UserState",
    "activate_users",
    "attempt_sync",
    "backoff_experiment",
    "collision_decode",
    "contend_frame",
    "density",
    "effective_bit_rate",
    "effective_rate",
    "first_rb",
    "frame_fill",
    "latency_ccdf",
    "latency_quantile",
    "peel_edges",
    "reliability",
    "run_simulation",
    "sic_peel",
    "summarize",
]
