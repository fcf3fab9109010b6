import math

import numpy as np
import pytest

from twotone.channel import ChannelConfig, Interferer, add_interferer, fspl_db, propagate
from twotone.errors import ConfigurationError
from twotone.rng import Rng
from twotone.signal import SampleBuffer, design_lowpass, filter as fir

RATE = 4e7


def tones(n=200_000):
    t = np.arange(n) / RATE
    return SampleBuffer(np.exp(-2j * np.pi * 5e6 * t) + np.exp(2j * np.pi * 5e6 * t), RATE)


def test_fspl_3m_900mhz():
    assert fspl_db(3.0, 9e8) == pytest.approx(41.08, abs=0.005)


def test_noiseless_is_scaled_input():
    tx = tones(1000)
    cfg = ChannelConfig(noise_density_dbm_hz=-math.inf, target_snr_db=None)
    (rx,) = propagate(tx, cfg, 1, Rng(0))
    assert np.array_equal(rx.samples, tx.samples * 10 ** (-cfg.loss_db / 20))


def test_exactly_one_noise_mode():
    with pytest.raises(ConfigurationError):
        ChannelConfig(noise_density_dbm_hz=-170.0, target_snr_db=20.0)
    with pytest.raises(ConfigurationError):
        ChannelConfig(noise_density_dbm_hz=None, target_snr_db=None)
    with pytest.raises(ConfigurationError):
        ChannelConfig(distance_m=0)


def test_followers_independent_and_reproducible():
    tx = tones(5000)
    a = propagate(tx, ChannelConfig(), 2, Rng(42))
    b = propagate(tx, ChannelConfig(), 2, Rng(42))
    assert not np.allclose(a[0].samples, a[1].samples)
    for x, y in zip(a, b):
        assert np.array_equal(x.samples, y.samples)


def test_noise_density_calibration():
    dens = -150.0
    cfg = ChannelConfig(noise_density_dbm_hz=dens, target_snr_db=None)
    zero = SampleBuffer(np.zeros(1_000_000, complex), RATE)
    (rx,) = propagate(zero, cfg, 1, Rng(5), tx_tone_amplitude=1.0)
    # power in a B-wide band: band-limit with a long low-pass, compare to density + 10 log B
    bw = 2e6
    lp = design_lowpass(bw / 2, 1001, RATE)
    y = fir(rx, lp).samples[2000:]
    enbw = RATE * np.sum(np.abs(lp.taps) ** 2)
    measured = 10 * np.log10(np.mean(np.abs(y) ** 2) * bw / enbw)
    assert measured == pytest.approx(dens + 10 * np.log10(bw), abs=0.2)


def test_snr_mode_self_consistent():
    tx = tones(1_000_000)
    cfg = ChannelConfig(target_snr_db=20.0, snr_bandwidth_hz=2e6)
    (rx,) = propagate(tx, cfg, 1, Rng(6), tx_tone_amplitude=1.0)
    noise = rx.samples - tx.samples * cfg.amplitude_scale
    tone_p = cfg.amplitude_scale ** 2
    noise_in_band = np.mean(np.abs(noise) ** 2) * 2e6 / RATE
    assert 10 * np.log10(tone_p / noise_in_band) == pytest.approx(20.0, abs=0.3)


def test_inferred_tone_amplitude():
    tx = tones(100_000)
    cfg = ChannelConfig()
    assert cfg.noise_variance(RATE, 1.0) == pytest.approx(
        cfg.noise_variance(RATE, math.sqrt(np.mean(np.abs(tx.samples) ** 2) / 2)), rel=1e-6)


def test_interferer_off_is_identity():
    rx = tones(100)
    assert add_interferer(rx, Interferer(power_rel_db=-math.inf), 9e8, 1.0) is rx


def test_cw_interferer_definition():
    rx = SampleBuffer(np.zeros(4000, complex), RATE)
    out = add_interferer(rx, Interferer(freq_hz=905e6, power_rel_db=0.0, phase_seed=3), 9e8, 0.25)
    z = out.samples
    assert np.allclose(np.abs(z), 0.25)
    spec = np.abs(np.fft.fft(z))
    f = np.fft.fftfreq(len(z), 1 / RATE)
    assert f[np.argmax(spec)] == pytest.approx(5e6)


def test_superposition_commutes():
    tx = tones(3000)
    intf = Interferer(freq_hz=893e6, power_rel_db=-3)
    cfg = ChannelConfig()
    (a,) = propagate(add_interferer(tx, intf, 9e8, 1.0 / cfg.amplitude_scale), cfg, 1, Rng(2), 1.0)
    (b,) = propagate(tx, cfg, 1, Rng(2), 1.0)
    b = add_interferer(b, intf, 9e8, 1.0)
    assert np.allclose(a.samples, b.samples, atol=1e-15)


def test_swept_rate():
    # 890 -> 910 MHz over 0.1 s
    intf = Interferer(kind="swept", freq_hz=890e6, sweep_rate_hz_per_s=2e8)
    n_win = int(1e-3 * RATE)
    freqs = []
    for t0 in (0.01, 0.05, 0.09):
        t = t0 + np.arange(n_win) / RATE
        z = intf.waveform(t, 9e8, 1.0)
        spec = np.abs(np.fft.fft(z, 8 * n_win))
        f = np.fft.fftfreq(8 * n_win, 1 / RATE)
        freqs.append(f[np.argmax(spec)])
    slope = np.polyfit([0.01, 0.05, 0.09], freqs, 1)[0]
    assert slope == pytest.approx(2e8, rel=0.05)


def test_pulsed_duty():
    intf = Interferer(kind="pulsed-cw", duty_cycle=0.25, period_s=1e-4)
    t = np.arange(400_000) / RATE
    on = np.abs(intf.waveform(t, 9e8, 1.0)) > 0
    assert on.mean() == pytest.approx(0.25, abs=1e-3)


def test_out_of_band_interferer():
    with pytest.raises(ConfigurationError):
        add_interferer(tones(10), Interferer(freq_hz=925e6), 9e8, 1.0)
    with pytest.raises(ConfigurationError):
        Interferer(kind="barrage")
