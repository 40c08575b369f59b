import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rainbowlink.beam import ArrayConfig, anchor_subcarrier, fejer_kernel
from rainbowlink.errors import ConfigError, DomainError
from rainbowlink.linkchan import sample_channel
from rainbowlink.sync import (
    DetectionTable,
    PreambleSpec,
    apply_dl_channel,
    circular_error,
    estimate_timing,
    gen_pn_preamble,
    identify_anchor,
    power_scan,
    snr_at_detection,
    sync_detection_mc,
    timing_grid,
    write_detection_csv,
)

CFG = ArrayConfig()


def test_preamble_deterministic_unit_modulus():
    preamble = PreambleSpec(22, 32, seed=5)
    a, b = gen_pn_preamble(preamble), gen_pn_preamble(preamble)
    assert a.shape == (32, 22)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(np.abs(a), 1.0)
    assert not np.array_equal(a, gen_pn_preamble(PreambleSpec(22, 32, seed=6)))


@pytest.mark.parametrize("seed", range(4))
def test_preamble_autocorrelation_low(seed):
    s = gen_pn_preamble(PreambleSpec(22, 32, seed)).real.ravel(order="F")
    n = s.size
    r = np.array([np.mean(s * np.roll(s, lag)) for lag in range(1, n)])
    # i.i.d. chips: nearly every lag under 3 / sqrt(n), rms near 1 / sqrt(n)
    assert np.mean(np.abs(r) <= 3 / math.sqrt(n)) >= 0.98
    assert math.sqrt(np.mean(r**2)) * math.sqrt(n) == pytest.approx(1.0, rel=0.2)


def test_spec_validation():
    with pytest.raises(ConfigError):
        PreambleSpec(0, 32)
    with pytest.raises(ConfigError):
        PreambleSpec(22, 1)


def test_noiseless_flat_is_scaled_preamble():
    s = gen_pn_preamble(PreambleSpec(22, 16, 0))
    obs = apply_dl_channel(s, 0.4, 0.0, math.inf, CFG, distortion=False)
    np.testing.assert_allclose(obs.rx_symbols, s, atol=1e-12)


def test_distortion_tapers_band_edges():
    band = 32
    s = gen_pn_preamble(PreambleSpec(4, band, 0))
    info = anchor_subcarrier(0.2, CFG)
    theta = math.asin(2 * info.anchor_sc / CFG.n_sc)  # exactly on the anchor direction
    obs = apply_dl_channel(s, theta, 0.0, math.inf, CFG)
    mag = np.abs(obs.rx_symbols[:, 0])
    centre = band // 2
    assert mag[0] < mag[centre]
    ratio = fejer_kernel(CFG.n_bs, math.pi * 2 * (-centre) / CFG.n_sc) / CFG.n_bs**2
    assert mag[0] ** 2 == pytest.approx(ratio, rel=1e-9)
    assert mag[centre] == pytest.approx(1.0, rel=1e-12)


def test_full_wrap_offset_is_identity():
    s = gen_pn_preamble(PreambleSpec(22, 32, 3))
    a = apply_dl_channel(s, -0.7, 0.0, math.inf, CFG)
    b = apply_dl_channel(s, -0.7, 32.0, math.inf, CFG)
    np.testing.assert_allclose(a.rx_symbols, b.rx_symbols, atol=1e-12)


@given(st.integers(min_value=4, max_value=64), st.data())
@settings(max_examples=40, deadline=None)
def test_noiseless_integer_offset_exact(band, data):
    d = data.draw(st.integers(0, band - 1))
    seed = data.draw(st.integers(0, 2**16))
    theta = data.draw(st.floats(-1.5, 1.5))
    s = gen_pn_preamble(PreambleSpec(6, band, seed))
    obs = apply_dl_channel(s, theta, float(d), math.inf, CFG, distortion=False)
    assert estimate_timing(obs, s) == d


def test_noiseless_fractional_offset_with_distortion():
    s = gen_pn_preamble(PreambleSpec(22, 32, 0))
    obs = apply_dl_channel(s, 0.3, 3.5, math.inf, CFG)
    assert abs(estimate_timing(obs, s) - 3.5) <= 0.25


def test_multipath_channel_runs_and_changes_observation():
    s = gen_pn_preamble(PreambleSpec(22, 32, 0))
    paths = sample_channel(0.3, 4, rng_seed=1)
    a = apply_dl_channel(s, 0.3, 2.0, math.inf, CFG, paths=paths)
    b = apply_dl_channel(s, 0.3, 2.0, math.inf, CFG)
    assert not np.allclose(a.rx_symbols, b.rx_symbols)
    assert estimate_timing(a, s) == pytest.approx(2.0, abs=0.5)


def test_pure_noise_estimates_spread_over_grid():
    preamble = PreambleSpec(22, 16, 0)
    s = gen_pn_preamble(preamble)
    rng = np.random.default_rng(0)
    est = [estimate_timing(apply_dl_channel(s, 0.0, 0.0, -math.inf, CFG, rng=rng), s) for _ in range(2000)]
    hist = np.histogram(np.mod(est, 16), bins=8, range=(0, 16))[0]
    assert hist.min() > 0.5 * hist.mean()


def test_finite_snr_requires_rng_and_shape_check():
    s = gen_pn_preamble(PreambleSpec(4, 8, 0))
    with pytest.raises(DomainError):
        apply_dl_channel(s, 0.0, 0.0, 0.0, CFG)
    obs = apply_dl_channel(s, 0.0, 0.0, 0.0, CFG, rng=1)
    with pytest.raises(DomainError):
        estimate_timing(obs, s[:, :2])


def test_grid_and_circular_error():
    g = timing_grid(32)
    assert g[0] == 0 and g[1] == 0.25 and g[-1] == pytest.approx(32 + 4 - 0.25)
    assert circular_error(31.75, 0.0, 32) == pytest.approx(-0.25)


def test_identify_anchor_noiseless_matches_beam():
    rng = np.random.default_rng(2)
    for theta in rng.uniform(-1.5, 1.5, 200):
        p = power_scan(theta, CFG, math.inf, None)
        assert identify_anchor(p) == anchor_subcarrier(theta, CFG).anchor_sc


def test_identify_anchor_ties_go_low():
    assert identify_anchor([1.0, 3.0, 3.0]) == 1
    assert identify_anchor([1.0, 3.0, 3.0], candidates=[7, 8, 9]) == 8


def test_identify_anchor_high_snr_within_one():
    # with B = 2N the neighbouring subcarriers sit near pattern nulls; the
    # scan averages power over the 22 preamble symbols
    cfg = ArrayConfig(64, 128)
    rng = np.random.default_rng(3)
    ok = 0
    trials = 10_000
    for theta in rng.uniform(-1.4, 1.4, trials):
        true = anchor_subcarrier(theta, cfg).anchor_sc
        est = identify_anchor(power_scan(theta, cfg, 10.0, rng, n_avg=22))
        ok += min((est - true) % cfg.n_sc, (true - est) % cfg.n_sc) <= 1
    assert ok / trials >= 0.99


def test_identify_anchor_noise_only_uniform():
    cfg = ArrayConfig(8, 16)
    rng = np.random.default_rng(4)
    picks = [identify_anchor(power_scan(0.3, cfg, -math.inf, rng)) for _ in range(8000)]
    counts = np.bincount(picks, minlength=16)
    assert counts.min() > 0.8 * counts.mean()


def test_detection_curve_properties():
    snrs = np.arange(-26.0, -8.0, 2.0)
    preamble = PreambleSpec(22, 32)
    off = sync_detection_mc(snrs, preamble, CFG, False, 1, 2000, rng_seed=1)
    on = sync_detection_mc(snrs, preamble, CFG, True, 1, 2000, rng_seed=1)
    p_off = np.array([p.p_detect for p in off])
    p_on = np.array([p.p_detect for p in on])
    se = np.array([p.stderr for p in on]) + 1e-3
    assert np.all(np.diff(p_on) >= -2 * se[1:])
    assert np.all(p_off >= p_on - 2 * se)
    short = sync_detection_mc(snrs, PreambleSpec(8, 32), CFG, True, 1, 2000, rng_seed=1)
    assert np.all(p_on >= np.array([p.p_detect for p in short]) - 2 * se)
    assert snr_at_detection(off) < snr_at_detection(on)


def test_detection_high_snr_saturates():
    pts = sync_detection_mc([20.0], PreambleSpec(22, 32), CFG, True, 4, 1000, rng_seed=2)
    assert pts[0].p_detect >= 0.99


def test_detection_worker_invariant_and_csv(tmp_path):
    preamble = PreambleSpec(22, 8)
    a = sync_detection_mc([-15.0, -10.0], preamble, CFG, True, 2, 1200, rng_seed=5, workers=1)
    b = sync_detection_mc([-15.0, -10.0], preamble, CFG, True, 2, 1200, rng_seed=5, workers=2)
    assert a == b
    path = tmp_path / "det.csv"
    write_detection_csv(path, a)
    assert path.read_text().splitlines()[0] == "snr_db,band_size,L,distortion,n_paths,trials,p_detect,stderr"
    table = DetectionTable.from_csv(path)
    assert table(-15.0) == pytest.approx(a[0].p_detect)
    with pytest.raises(DomainError):
        sync_detection_mc([0.0], preamble, CFG, True, 1, 50, rng_seed=0)


def test_detection_table_interpolation():
    t = DetectionTable((-20.0, -10.0), (0.2, 0.8))
    assert t(-15.0) == pytest.approx(0.5)
    assert t(-30.0) == 0.2 and t(0.0) == 0.8
    with pytest.raises(ConfigError):
        DetectionTable((-10.0, -20.0), (0.1, 0.2))
