"""``rainbowlink`` command-line entry point.

Exit status is 0 on success, 2 on a configuration or usage error and 1 on
any other failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from .. import analysis, beam, mac, sync
from ..errors import ConfigError, DomainError
from ..mac.output import fmt, write_ccdf, write_frames, write_summary
from ..parallel import map_shards
from .config import SCHEMA, ExperimentConfig, load_config

log = logging.getLogger("rainbowlink")


def _build(cfg: ExperimentConfig, section: str, ctor: Callable, **kwargs):
    try:
        return ctor(**kwargs)
    except (ConfigError, DomainError) as exc:
        raise ConfigError(f"{cfg.source}: [{section}] {exc}") from exc


def _array(cfg: ExperimentConfig) -> beam.ArrayConfig:
    return _build(cfg, "array", beam.ArrayConfig, **cfg["array"])


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _db(x) -> float:
    with np.errstate(divide="ignore"):
        return float(10 * np.log10(x))


def cmd_gain(cfg: ExperimentConfig) -> list[Path]:
    """Beam pattern per subcarrier and the anchor-to-neighbour gain ratio."""
    acfg = _array(cfg)
    p = cfg["gain"]
    if p["theta_points"] < 2 or p["zeta_points"] < 2 or p["k_max"] < 1:
        raise ConfigError(f"{cfg.source}: [gain] point counts must be >= 2 and k_max >= 1")
    bad = [b for b in p["subcarriers"] if not 0 <= b < acfg.n_sc]
    if bad:
        raise ConfigError(f"{cfg.where('gain', 'subcarriers')}: out of range {bad}")
    theta = np.arcsin(np.linspace(-1.0, 1.0, p["theta_points"]))
    rows = []
    for b in p["subcarriers"]:
        g = beam.beam_gain(theta, b, acfg)
        rows.extend((t, b, _db(v)) for t, v in zip(theta, g))
    out_gain = cfg.output_path / "gain.csv"
    _write(out_gain, ("theta", "b", "gain_db"), rows)
    eta_rows = []
    for zeta in np.linspace(-1.0, 1.0, p["zeta_points"]):
        for k in range(1, p["k_max"] + 1):
            eta_rows.append((zeta, k, _db(beam.gain_ratio_eta(float(zeta), k, acfg))))
    out_eta = cfg.output_path / "eta.csv"
    _write(out_eta, ("zeta", "b", "eta_db"), eta_rows)
    return [out_gain, out_eta]


def cmd_collision(cfg: ExperimentConfig) -> list[Path]:
    """Per-cell collision probability, analytic against placement MC."""
    p = cfg["collision"]
    u, n_rb = p["users"], p["n_rb"]
    if u < 0 or n_rb < 2 or p["trials"] < 1:
        raise ConfigError(f"{cfg.source}: [collision] need users >= 0, n_rb >= 2, trials >= 1")
    mc, se = analysis.collision_prob_mc(u, n_rb, p["trials"], cfg.master_seed, cfg.worker_count)
    b = np.arange(-(n_rb // 2) + 1, (n_rb + 1) // 2)
    lam = analysis.lambda_b(u, b, n_rb)
    ana = analysis.collision_prob(lam)
    idx = np.mod(b, n_rb)
    rows = [(bb, ll, aa, mc[i], se[i]) for bb, ll, aa, i in zip(b, lam, ana, idx)]
    if n_rb % 2 == 0:
        le = u * (math.pi - 2 * math.asin((n_rb - 1) / n_rb)) / math.pi
        i = n_rb // 2
        rows.append((n_rb // 2, le, analysis.collision_prob(le), mc[i], se[i]))
    out_p = cfg.output_path / "collision.csv"
    _write(out_p, ("b", "lambda", "p_analytic", "p_mc", "stderr"), rows)
    uc_rows = []
    for k, uu in enumerate(p["uc_users"]):
        m, s = analysis.colliding_users_mc(uu, n_rb, p["uc_trials"], cfg.master_seed + 1 + k, cfg.worker_count)
        uc_rows.append((uu, analysis.expected_colliding_users(uu, n_rb), m, s,
                        analysis.uniform_collision_fraction(uu, n_rb) * uu))
    out_uc = cfg.output_path / "colliding_users.csv"
    _write(out_uc, ("users", "uc_analytic", "uc_mc", "stderr", "uc_uniform"), uc_rows)
    return [out_p, out_uc]


def cmd_plr(cfg: ExperimentConfig) -> list[Path]:
    """Loss rate against repetitions for several user counts."""
    p = cfg["plr"]
    k = p["k_rb"]
    n_max = p["n_max"] or k
    rows = []
    for ui, u in enumerate(p["users"]):
        params = [_build(cfg, "plr", analysis.PlrParams, n_rb_total=p["n_rb_total"], k_rb=k, n_users=u,
                         n_rep=n, grouping=p["grouping"]) for n in range(1, n_max + 1)]
        ana = [analysis.plr(x) for x in params]
        best = int(np.argmin(ana)) + 1
        for n, x, a in zip(range(1, n_max + 1), params, ana):
            if p["trials"] > 0:
                est, se = analysis.plr_oracle_mc(x, p["trials"], cfg.master_seed + 1000 * ui + n, cfg.worker_count)
            else:
                est, se = math.nan, math.nan
            rows.append((u, n, a, est, se, int(n == best)))
    out = cfg.output_path / "plr.csv"
    _write(out, ("users", "n", "plr_analytic", "plr_mc", "stderr", "optimal"), rows)
    return [out]


def cmd_sync(cfg: ExperimentConfig) -> list[Path]:
    """Detection curves for each band size with and without distortion."""
    acfg = _array(cfg)
    p = cfg["sync"]
    if p["snr_step_db"] <= 0 or p["snr_max_db"] < p["snr_min_db"]:
        raise ConfigError(f"{cfg.source}: [sync] bad SNR range")
    n_steps = int(math.floor((p["snr_max_db"] - p["snr_min_db"]) / p["snr_step_db"] + 1e-9)) + 1
    snrs = p["snr_min_db"] + p["snr_step_db"] * np.arange(n_steps)
    points = []
    for band in p["band_sizes"]:
        preamble = _build(cfg, "sync", sync.PreambleSpec, n_symbols=p["n_symbols"], band_size=band,
                      seed=p["preamble_seed"])
        for distortion in (False, True):
            try:
                points += sync.sync_detection_mc(snrs, preamble, acfg, distortion, p["n_paths"], p["trials"],
                                                 cfg.master_seed, cfg.worker_count)
            except DomainError as exc:
                raise ConfigError(f"{cfg.source}: [sync] {exc}") from exc
    out = cfg.output_path / "sync.csv"
    sync.write_detection_csv(out, points)
    return [out]


def _sim_config(cfg: ExperimentConfig, prob: float) -> mac.SimConfig:
    p = cfg["sim"]
    table = None
    if p["sync_table"]:
        try:
            table = sync.DetectionTable.from_csv(p["sync_table"])
        except OSError as exc:
            raise ConfigError(f"{cfg.where('sim', 'sync_table')}: {exc}") from exc
    return _build(
        cfg, "sim", mac.SimConfig,
        array=_array(cfg), pool_size=p["pool_size"], activation_prob=prob, grouping=p["grouping"],
        k_rb=p["k_rb"] or None, n_rep=p["n_rep"] or None, decode_mode=p["decode_mode"],
        sync_model=p["sync_model"], sync_table=table, phased_beams=p["phased_beams"],
        phased_sectors_per_frame=p["phased_sectors_per_frame"], radius_m=p["radius_m"],
        n_frames=p["n_frames"], warmup_frames=p["warmup_frames"], drain_frames=p["drain_frames"],
        rng_seed=cfg.master_seed,
    )


def cmd_sim(cfg: ExperimentConfig) -> list[Path]:
    """MAC simulation for each activation probability."""
    probs = cfg["sim"]["activation_prob"]
    if not probs:
        raise ConfigError(f"{cfg.where('sim', 'activation_prob')}: empty list")
    configs = [_sim_config(cfg, pr) for pr in probs]
    results = map_shards(mac.run_simulation, configs, cfg.worker_count)
    written = []
    for i, res in enumerate(results):
        tag = "" if len(results) == 1 else f"_{i}"
        for name, fn in (("ccdf", write_ccdf), ("frames", write_frames)):
            path = cfg.output_path / f"{name}{tag}.csv"
            fn(path, res)
            written.append(path)
    out = cfg.output_path / "summary.csv"
    write_summary(out, results)
    return written + [out]


def cmd_backoff(cfg: ExperimentConfig) -> list[Path]:
    """Slots to drain and residual users for several loads."""
    p = cfg["backoff"]
    slot_rows, residual_rows = [], []
    for i, ratio in enumerate(p["users_per_rb"]):
        u = max(1, int(round(ratio * p["n_rb"])))
        try:
            r = mac.backoff_experiment(u, p["half_window"], p["payload_slots"], p["n_rb"],
                                       cfg.master_seed + i, trials=p["trials"], max_rounds=p["max_rounds"])
        except DomainError as exc:
            raise ConfigError(f"{cfg.source}: [backoff] {exc}") from exc
        slot_rows.append((ratio, u, p["half_window"], p["payload_slots"], r.total_slots,
                          r.completed_within(1), r.completed_within(3), int(r.drained)))
        t = p["payload_slots"]
        for rnd, res in enumerate(r.residual, start=1):
            residual_rows.append((ratio, rnd * t, res, float(np.mean(r.utilization[(rnd - 1) * t: rnd * t]))))
    out_s = cfg.output_path / "backoff_slots.csv"
    _write(out_s, ("users_per_rb", "users", "half_window", "payload_slots", "total_slots",
                   "completed_1_round", "completed_3_rounds", "drained"), slot_rows)
    out_r = cfg.output_path / "backoff_residual.csv"
    _write(out_r, ("users_per_rb", "slot", "residual", "utilization"), residual_rows)
    return [out_s, out_r]


COMMANDS: dict[str, Callable[[ExperimentConfig], list[Path]]] = {
    "gain": cmd_gain,
    "collision": cmd_collision,
    "plr": cmd_plr,
    "sync": cmd_sync,
    "sim": cmd_sim,
    "backoff": cmd_backoff,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rainbowlink", description="Rainbow-beam grant-free access experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        sp.add_argument("--config", type=Path, help="INI file with parameter sections")
        sp.add_argument("--seed", type=int, help="master seed (default 0)")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--workers", type=int, help="worker processes (default 1)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one parameter; repeatable")
        sp.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.command, args.config, args.overrides, args.seed, args.out, args.workers)
        if args.dump_config:
            sys.stdout.write(cfg.dump())
            return 0
        cfg.output_path.mkdir(parents=True, exist_ok=True)
        (cfg.output_path / f"effective_{args.command}.ini").write_text(cfg.dump(), encoding="utf-8")
        for path in COMMANDS[args.command](cfg):
            log.info("wrote %s", path)
    except ConfigError as exc:
        print(f"rainbowlink: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surface any failure as exit 1
        print(f"rainbowlink: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

__all__ = ["COMMANDS", "SCHEMA", "main"]
