import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rainbowlink.analysis import PlrParams, plr
from rainbowlink.errors import ConfigError, DomainError
from rainbowlink.mac import (
    FrameDesign,
    LatencyRecord,
    Numerology,
    SimConfig,
    activate_users,
    attempt_sync,
    backoff_experiment,
    collision_decode,
    contend_frame,
    density,
    effective_bit_rate,
    effective_rate,
    latency_ccdf,
    latency_quantile,
    reliability,
    run_simulation,
    sic_peel,
    summarize,
)
from rainbowlink.mac.output import write_ccdf, write_frames, write_summary
from rainbowlink.mac.sim import _contend
from rainbowlink.seeding import child_rng
from rainbowlink.sync import DetectionTable


def stopping_set_oracle(inc):
    """Undecodable users form the largest set whose RBs all carry >= 2 of them."""
    inc = np.asarray(inc, dtype=bool)
    users = range(inc.shape[0])
    stuck = set()
    for r in range(1, inc.shape[0] + 1):
        for sub in itertools.combinations(users, r):
            deg = inc[list(sub)].sum(axis=0)
            if np.all((deg == 0) | (deg >= 2)):
                stuck |= set(sub)
    return set(users) - stuck


# ---- numerology and frame ---------------------------------------------------

def test_numerology_defaults():
    n = Numerology()
    assert n.sc_spacing_hz == pytest.approx(480e3)
    assert n.symbol_us == pytest.approx(2.083, abs=5e-4)
    assert n.symbol_with_cp_us == pytest.approx(2.344, abs=5e-4)
    assert n.tti_us == pytest.approx(30.469, abs=5e-4)
    assert n.tti_us == n.symbols_per_tti * n.symbol_with_cp_us


def test_frame_defaults_consistent():
    f = FrameDesign()
    assert f.total_symbols == 52 == (f.ul_ttis + f.dl_ttis) * Numerology().symbols_per_tti
    f.check()
    assert f.t_dl_us == 62.5
    with pytest.raises(ConfigError):
        FrameDesign(ul_payload_symbols=20).check()
    with pytest.raises(ConfigError):
        FrameDesign(frame_us=100.0).check()


# ---- metrics ----------------------------------------------------------------

def test_effective_rate():
    assert effective_rate(125.0, 4, 18) == pytest.approx(576_000.0)
    assert effective_bit_rate(125.0, 4, 18) == pytest.approx(1.536e6)
    assert effective_bit_rate(125.0, 1, 18) == pytest.approx(0.384e6)
    assert effective_rate(250.0, 4, 18) == pytest.approx(effective_rate(125.0, 4, 18) / 2)
    with pytest.raises(DomainError):
        effective_rate(0.0, 1, 18)


def test_density():
    assert density(0.03, 1000, 400, 125) == pytest.approx(0.9549, abs=1e-4)
    assert density(0.165, 1000, 400, 125) == pytest.approx(5.25, abs=0.01)
    assert density(0.0, 1000, 400, 125) == 0.0


def test_ccdf_and_censoring():
    lat = [100, 200, 300]
    np.testing.assert_allclose(latency_ccdf(lat, [0, 150, 300]), [1, 2 / 3, 0])
    assert reliability(lat, 300, censored=1) == pytest.approx(0.75)
    assert latency_quantile(lat, 0.99, censored=1) == math.inf
    assert latency_quantile(lat, 0.5) == 200


def test_latency_record_identities():
    r = LatencyRecord.from_components(12.5, 125.0, 62.5, 250.0)
    assert r.t_sync_us == r.t_activation_us + r.t_failure_us + r.t_dl_us
    assert r.t_cont_us == r.t_packetloss_us + r.t_dl_us
    assert r.t_total_us == r.t_sync_us + r.t_cont_us


# ---- SIC peeling --------------------------------------------------------------

def test_peel_chain_and_core():
    chain = [[1, 1, 0], [0, 1, 1]]
    assert sic_peel(chain) == {0, 1}
    core = [[1, 1], [1, 1]]
    assert sic_peel(core) == set()


@given(st.integers(1, 6), st.integers(1, 6), st.data())
@settings(max_examples=200, deadline=None)
def test_peel_matches_stopping_set_oracle(n_users, n_rbs, data):
    inc = np.array(
        [[data.draw(st.booleans()) for _ in range(n_rbs)] for _ in range(n_users)], dtype=bool
    )
    inc[~inc.any(axis=1), 0] = True  # every user sends at least one replica
    assert sic_peel(inc) == stopping_set_oracle(inc)


def test_peel_contains_collision_decoding():
    rng = np.random.default_rng(0)
    for _ in range(300):
        inc = rng.random((6, 8)) < 0.3
        inc[~inc.any(axis=1), 0] = True
        u, r = np.nonzero(inc)
        plain = set(np.flatnonzero(collision_decode(u, r, 6, 8)).tolist())
        assert plain <= sic_peel(inc)


# ---- simulation pieces -----------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(activation_prob=1.5)
    with pytest.raises(ConfigError):
        SimConfig(k_rb=8, n_rep=9)
    with pytest.raises(ConfigError):
        SimConfig(sync_model="snr_table")
    with pytest.raises(ConfigError):
        SimConfig(decode_mode="magic")


def test_default_repetitions():
    assert SimConfig(grouping=4).n == 3
    assert SimConfig(grouping=1, activation_prob=0.165).n == 5
    assert SimConfig(grouping=2, n_rep=2).n == 2


def test_activation_statistics():
    cfg = SimConfig(activation_prob=0.03)
    counts = np.array([len(activate_users(cfg, f)) for f in range(3000)])
    se = math.sqrt(1000 * 0.03 * 0.97 / counts.size)
    assert abs(counts.mean() - 30) < 3 * se
    assert activate_users(SimConfig(activation_prob=0.0), 5) == []
    a = activate_users(cfg, 7)
    b = activate_users(cfg, 7)
    assert [u.theta for u in a] == [u.theta for u in b]
    assert all(len(u.band) == cfg.k for u in a)
    assert all(7 * 125.0 <= u.arrival_time_us < 8 * 125.0 for u in a)


def test_sync_ideal_and_table():
    cfg = SimConfig()
    u = activate_users(cfg, 0)[0]
    assert attempt_sync(u, cfg, 0) and u.state == "synced" and u.sync_attempts == 1
    with pytest.raises(ValueError):
        attempt_sync(u, cfg, 0)
    table = DetectionTable((-40.0, 40.0), (0.5, 0.5))
    tcfg = SimConfig(sync_model="snr_table", sync_table=table)
    rng = np.random.default_rng(3)
    attempts = []
    for f in range(400):
        for user in activate_users(tcfg, f)[:5]:
            while not attempt_sync(user, tcfg, rng):
                pass
            attempts.append(user.sync_attempts)
    se = math.sqrt(2.0 / len(attempts))  # geometric(1/2) has variance 2
    assert abs(np.mean(attempts) - 2.0) < 3 * se


def test_contend_trivial_cases():
    cfg = SimConfig(grouping=2, n_rep=5)
    users = activate_users(cfg, 0)[:1]
    for u in users:
        u.advance("synced")
    assert contend_frame(users, cfg, 0) == {users[0].id}
    # two users far apart in angle never interact
    pair = [u for u in activate_users(cfg, 1)]
    pair.sort(key=lambda u: u.anchor.anchor_sc)
    a, b = pair[0], pair[-1]
    if abs(int(a.band[0]) - int(b.band[0])) >= cfg.k:
        for u in (a, b):
            u.advance("synced")
        assert contend_frame([a, b], cfg, 1) == {a.id, b.id}


def test_contention_loss_matches_model():
    # users spread uniformly over the RB circle match the band-overlap model
    cfg = SimConfig(grouping=32, k_rb=4, n_rep=2, array=SimConfig().array)
    n_rb, u = cfg.n_rb, 8
    losses = trials = 0
    for t in range(20_000):
        rng = child_rng(11, t)
        start = rng.integers(0, n_rb, u)
        ok, _ = _contend(start, cfg, rng)
        losses += int(not ok[0])
        trials += 1
    est = losses / trials
    se = math.sqrt(est * (1 - est) / trials)
    ana = plr(PlrParams(n_rb, 4, u, 2, 32))
    assert abs(est - ana) <= max(0.15 * ana, 3 * se)


def test_user_state_transitions():
    u = activate_users(SimConfig(), 0)[0]
    with pytest.raises(ValueError):
        u.advance("done")
    u.advance("synced")
    u.advance("done")


# ---- full runs ---------------------------------------------------------------

def test_lone_user_latency():
    cfg = SimConfig(activation_prob=0.001, n_frames=300, warmup_frames=0, rng_seed=4)
    res = run_simulation(cfg)
    assert res.records
    for r in res.records:
        assert r.t_failure_us == 0.0
        if r.t_packetloss_us == 0.0:
            assert r.t_total_us == r.t_activation_us + 2 * r.t_dl_us


def test_run_invariants_and_determinism(tmp_path):
    cfg = SimConfig(activation_prob=0.02, n_frames=150, warmup_frames=10, drain_frames=40, rng_seed=7,
                    decode_mode="sic")
    a = run_simulation(cfg)
    b = run_simulation(cfg)
    assert a.conservation_ok
    assert a.total_arrivals == a.completed + a.in_flight_end
    tracked = sum(f.arrivals for f in a.frames)
    assert tracked == len(a.records) + a.censored
    for r in a.records:
        assert r.t_total_us == r.t_sync_us + r.t_cont_us
        assert r.t_sync_us == r.t_activation_us + r.t_failure_us + r.t_dl_us
        assert r.t_cont_us == r.t_packetloss_us + r.t_dl_us
        assert 0 < r.t_activation_us <= 125.0
    assert [r.t_total_us for r in a.records] == [r.t_total_us for r in b.records]
    assert len(a.frames) == 150
    for name, fn in (("ccdf.csv", write_ccdf), ("frames.csv", write_frames)):
        fn(tmp_path / name, a)
        text = (tmp_path / name).read_text()
        fn(tmp_path / name, b)
        assert (tmp_path / name).read_text() == text
    write_summary(tmp_path / "summary.csv", [a])
    header = (tmp_path / "summary.csv").read_text().splitlines()[0]
    assert header == "p,G,K,n,mean_latency,p99999_latency,reliability_at_1ms,mean_reff,aggregate_throughput"


def test_sic_never_worse_than_collision():
    base = dict(activation_prob=0.05, grouping=4, n_frames=200, warmup_frames=10, rng_seed=5)
    plain = summarize(run_simulation(SimConfig(decode_mode="collision", **base)))
    sic = summarize(run_simulation(SimConfig(decode_mode="sic", **base)))
    assert sic["mean_latency"] <= plain["mean_latency"] + 1e-9


def test_snr_table_sync_adds_failures():
    table = DetectionTable((-30.0, 0.0), (0.3, 0.3))
    cfg = SimConfig(sync_model="snr_table", sync_table=table, activation_prob=0.01, n_frames=100,
                    warmup_frames=5, rng_seed=2)
    res = run_simulation(cfg)
    fails = np.array([r.t_failure_us for r in res.records]) / 125.0
    assert fails.mean() == pytest.approx(0.7 / 0.3, rel=0.25)


def test_phased_baseline_slower_sync():
    base = dict(activation_prob=0.01, n_frames=100, warmup_frames=5, rng_seed=2)
    ttd = run_simulation(SimConfig(**base))
    pa = run_simulation(SimConfig(sync_model="phased", phased_sectors_per_frame=4, **base))
    assert np.mean([r.t_sync_us for r in pa.records]) > np.mean([r.t_sync_us for r in ttd.records])


# ---- backoff -------------------------------------------------------------------

def test_backoff_single_user():
    r = backoff_experiment(1, 2, 5, 64, rng_seed=0)
    assert r.total_slots == 5.0 and r.drained


def test_backoff_disjoint_windows():
    r = backoff_experiment(10, 0, 3, 16, rng_seed=0, anchors=np.arange(10))
    assert r.total_slots == 3.0
    assert r.utilization.shape == (3,)
    assert r.utilization[0] == pytest.approx(10 / 16)


def test_backoff_zero_window_deadlocks_when_shared():
    r = backoff_experiment(2, 0, 1, 16, rng_seed=0, anchors=[3, 3], max_rounds=50)
    assert not r.drained and math.isnan(r.total_slots)


def test_backoff_progress_and_determinism():
    a = backoff_experiment(256, 4, 2, 256, rng_seed=1, trials=5)
    b = backoff_experiment(256, 4, 2, 256, rng_seed=1, trials=5)
    np.testing.assert_array_equal(a.residual, b.residual)
    assert np.all(np.diff(a.residual) <= 0)
    assert a.drained and np.all(a.slots_per_trial % 2 == 0)
    with pytest.raises(DomainError):
        backoff_experiment(0, 1, 1, 16, rng_seed=0)
