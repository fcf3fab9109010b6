import numpy as np
import pytest
from hypothesis import given, strategies as st

from twotone.errors import ConfigurationError
from twotone.leader import (
    PHASE_RANDOM,
    HopSchedule,
    TwoToneConfig,
    TwoToneSource,
    apply_pa,
    generate_hop_sequence,
    hop_sample_index,
    synthesize_two_tone,
)
from twotone.rng import Rng
from twotone.signal import OscillatorModel, SampleBuffer

RATE = 4e7
IDEAL = OscillatorModel()


def single(center=9e8, n=1 << 16, osc=IDEAL, cfg=None):
    cfg = cfg or TwoToneConfig()
    return synthesize_two_tone(cfg, [(0.0, center)], osc, RATE, Rng(1), duration_s=n / RATE)


def test_single_center_is_real_cosine():
    s = single(n=4096).samples
    n = np.arange(4096)
    assert np.allclose(s, 2 * np.cos(2 * np.pi * 5e6 * n / RATE), atol=1e-9)


def test_two_dft_peaks_60db():
    s = single().samples
    spec = np.abs(np.fft.fft(s))
    freqs = np.fft.fftfreq(len(s), 1 / RATE)
    med = np.median(spec)
    for f in (5e6, -5e6):
        k = int(np.argmin(np.abs(freqs - f)))
        assert 20 * np.log10(spec[k] / med) >= 60
    top2 = np.sort(freqs[np.argsort(spec)[-2:]])
    assert np.allclose(top2, [-5e6, 5e6])


def test_ppm_scales_beat():
    eps = 1.0
    s = single(n=40000, osc=OscillatorModel(ppm_offset=eps)).samples
    n = np.arange(len(s))
    t = n / RATE
    f1, f2 = -5e6 * (1 + eps * 1e-6), 5e6 * (1 + eps * 1e-6)
    assert np.allclose(s, np.exp(2j * np.pi * f1 * t) + np.exp(2j * np.pi * f2 * t), atol=1e-8)
    assert f2 - f1 == pytest.approx(10_000_010.0, abs=1e-6)


def test_hop_sequence_matches_splitmix():
    sch = HopSchedule(total_duration_s=4.0, dwell_s=1.0)
    hops = generate_hop_sequence(sch, Rng(1))
    r = Rng(1)
    expect = [sch.centers_hz[r.next_u64() % 5] for _ in range(4)]
    assert [c for _, c in hops] == expect
    assert [s for s, _ in hops] == [0.0, 1.0, 2.0, 3.0]


def test_singleton_centers():
    hops = generate_hop_sequence(HopSchedule(centers_hz=(9e8,), total_duration_s=3.0), Rng(4))
    assert all(c == 9e8 for _, c in hops)


def test_segment_count_and_starts():
    hops = generate_hop_sequence(HopSchedule(dwell_s=0.1, total_duration_s=0.5), Rng(0))
    assert [s for s, _ in hops] == pytest.approx([0, 0.1, 0.2, 0.3, 0.4])


def test_fixed_sequence_cycles():
    hops = generate_hop_sequence(HopSchedule(dwell_s=1, total_duration_s=5, fixed_sequence=(4, 0)), Rng(0))
    assert [c for _, c in hops] == [910e6, 890e6, 910e6, 890e6, 910e6]


def test_schedule_errors():
    with pytest.raises(ConfigurationError):
        HopSchedule(centers_hz=())
    with pytest.raises(ConfigurationError):
        HopSchedule(dwell_s=0)
    with pytest.raises(ConfigurationError):
        generate_hop_sequence(HopSchedule(dwell_s=2, total_duration_s=1), Rng(0))


def test_nyquist_violation():
    cfg = TwoToneConfig(delta_f_hz=3e7)
    with pytest.raises(ConfigurationError, match="Nyquist"):
        synthesize_two_tone(cfg, [(0.0, 910e6)], IDEAL, RATE, Rng(0), duration_s=1e-4)


def test_hop_index_rounding():
    assert hop_sample_index(0.1, RATE) == 4_000_000
    assert hop_sample_index(0.3, 3.0) == 0


def hopped(mode="continuous", n_seg=5, dwell=5e-5):
    hops = [(i * dwell, c) for i, c in enumerate([890e6, 905e6, 900e6, 910e6, 895e6][:n_seg])]
    cfg = TwoToneConfig(phase_mode=mode)
    return hops, synthesize_two_tone(cfg, hops, IDEAL, RATE, Rng(3), duration_s=n_seg * dwell)


def test_beat_invariant_per_segment():
    hops, buf = hopped(dwell=1.6384e-3)
    seg = int(1.6384e-3 * RATE)
    for i in range(5):
        x = buf.samples[i * seg:(i + 1) * seg]
        spec = np.abs(np.fft.fft(x))
        f = np.fft.fftfreq(seg, 1 / RATE)
        pk = np.sort(f[np.argsort(spec)[-2:]])
        assert abs((pk[1] - pk[0]) - 1e7) <= RATE / seg


def test_phase_continuity_across_hops():
    # rebuild each tone's phase from the analytic model and compare at boundaries
    hops, buf = hopped()
    src = TwoToneSource(TwoToneConfig(), hops, IDEAL, RATE, Rng(3), 5 * 5e-5)
    prev = None
    for i, (_, c) in enumerate(hops):
        src._enter_segment(i) if i else None
        acc = src.acc.copy()
        if prev is not None:
            prev_f, prev_acc, n0, n1 = prev
            carried = np.mod(prev_acc + 2 * np.pi * prev_f * (n1 - n0) / RATE, 2 * np.pi)
            d = np.angle(np.exp(1j * (carried - acc)))
            assert np.all(np.abs(d) < 1e-9)
        prev = (src.f.copy(), acc, src.seg_starts[i], src.seg_starts[i + 1] if i + 1 < 5 else src.n_total)


def test_random_mode_breaks_continuity():
    _, a = hopped("continuous")
    _, b = hopped(PHASE_RANDOM)
    seg = int(5e-5 * RATE)
    assert np.allclose(a.samples[:seg], b.samples[:seg])
    assert not np.allclose(a.samples[seg:2 * seg], b.samples[seg:2 * seg])


def test_spectral_occupancy():
    # abrupt retunes splatter with a 1/f^2 skirt whose share scales with hops per
    # second; measured beyond the front filter's 2 MHz guard, widest jump, 50 ms dwell
    hops = [(0.0, 890e6), (0.05, 910e6)]
    s = synthesize_two_tone(TwoToneConfig(), hops, IDEAL, RATE, Rng(0), duration_s=0.1).samples
    p = np.abs(np.fft.fft(s * np.blackman(len(s)))) ** 2
    f = np.fft.fftfreq(len(s), 1 / RATE)
    outside = p[np.abs(f) > 17e6].sum() / p.sum()
    assert 10 * np.log10(outside) <= -60


@given(st.lists(st.integers(1, 5000), min_size=1, max_size=6))
def test_chunked_synthesis_matches(sizes):
    hops = [(i * 2e-5, c) for i, c in enumerate([890e6, 905e6, 900e6, 910e6])]
    osc = OscillatorModel(ppm_offset=3, drift_ppm_per_s=20, phase_noise_diffusion=10)
    whole = synthesize_two_tone(TwoToneConfig(), hops, osc, RATE, Rng(9), duration_s=8e-5).samples
    src = TwoToneSource(TwoToneConfig(), hops, osc, RATE, Rng(9), 8e-5)
    parts = []
    while not src.done:
        for k in sizes:
            parts.append(src.next(k))
    assert np.allclose(np.concatenate(parts), whole, atol=1e-9)


def test_pa_identity_gain_and_clip():
    x = SampleBuffer(np.array([0.1 + 0.2j, 10.0, -3j]), RATE)
    assert np.array_equal(apply_pa(x, TwoToneConfig()).samples, x.samples)
    assert np.allclose(apply_pa(x, TwoToneConfig(pa_gain_db=20)).samples, 10 * x.samples, rtol=1e-15)
    y = apply_pa(x, TwoToneConfig(pa_output_ceiling=1.0)).samples
    assert abs(y[1]) == pytest.approx(np.tanh(10.0), rel=1e-15)
    assert np.angle(y[2]) == pytest.approx(-np.pi / 2)
