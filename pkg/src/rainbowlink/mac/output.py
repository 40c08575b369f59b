"""CSV writers for simulation results. Floats use ``.9g``."""

from __future__ import annotations

import csv

import numpy as np

from .metrics import latency_ccdf
from .sim import SimResult, summarize

SUMMARY_COLUMNS = ("p", "G", "K", "n", "mean_latency", "p99999_latency", "reliability_at_1ms",
                   "mean_reff", "aggregate_throughput")
FRAME_COLUMNS = ("frame", "arrivals", "contenders", "successes", "occupied_rbs", "throughput_symbols")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".9g")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def ccdf_grid(result: SimResult, step_us: float | None = None) -> np.ndarray:
    """Thresholds from 0 to past the largest latency, a tenth of a frame apart."""
    frame = result.config.frame_design.frame_us
    step = frame / 10 if step_us is None else step_us
    top = max(float(result.latencies_us.max()) if result.latencies_us.size else 0.0, 8 * frame)
    return np.arange(0.0, top + step, step)


def write_ccdf(path, result: SimResult, thresholds=None) -> None:
    thr = ccdf_grid(result) if thresholds is None else np.asarray(thresholds, dtype=float)
    ccdf = latency_ccdf(result.latencies_us, thr, result.censored)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(("threshold_us", "ccdf"))
        for t, c in zip(thr, ccdf):
            w.writerow((fmt(t), fmt(c)))


def write_frames(path, result: SimResult) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(FRAME_COLUMNS)
        for f in result.frames:
            w.writerow([fmt(getattr(f, c)) for c in FRAME_COLUMNS])


def write_summary(path, results: list[SimResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in results:
            s = summarize(r)
            w.writerow([fmt(s[c]) for c in SUMMARY_COLUMNS])
