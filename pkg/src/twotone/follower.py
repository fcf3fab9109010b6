"""Follower reference-extraction chain.

front band-pass -> LNA -> square-law self-mix -> 10 MHz band-pass -> AGC.
Nothing in this module accepts the hop schedule; hop instants only ride
along on the returned ``ExtractedClock`` for analysis-side gating.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigurationError
from .rng import Rng
from .signal import (
    FirFilter,
    SampleBuffer,
    StreamingFir,
    design_bandpass,
    design_lowpass,
    filter as fir_filter,
)

log = logging.getLogger(__name__)

KT0_DBM_HZ = -174.0


@dataclass(frozen=True)
class BandSpec:
    center_hz: float
    bw_hz: float
    num_taps: int


@dataclass(frozen=True)
class LnaConfig:
    gain_db: float = 20.0
    noise_figure_db: float = 3.0


@dataclass(frozen=True)
class AgcConfig:
    target_rms: float = 1.0
    loop_gain: float = 0.05
    rms_time_constant_s: float = 1e-4
    max_gain_db: float = 60.0
    rms_floor: float = 1e-12


def _default_front() -> BandSpec:
    # 30 MHz hop span plus 2 MHz guard per side keeps edge tones off the roll-off
    return BandSpec(center_hz=9e8, bw_hz=3.4e7, num_taps=63)


def _default_ref() -> BandSpec:
    return BandSpec(center_hz=1e7, bw_hz=2e6, num_taps=201)


@dataclass(frozen=True)
class ReceiverChainConfig:
    """Per-follower chain parameters.

    ``front_bpf.center_hz`` is absolute RF; ``ref_bpf`` is at the beat
    frequency. ``follower_ppm`` never touches the signal path; analysis applies
    it as a time-axis scale.
    """

    front_bpf: BandSpec = field(default_factory=_default_front)
    front_enabled: bool = True
    lna_first: bool = False
    lna: LnaConfig = field(default_factory=LnaConfig)
    mixer_loss_db: float = 6.0
    ref_bpf: BandSpec = field(default_factory=_default_ref)
    agc: AgcConfig = field(default_factory=AgcConfig)
    follower_ppm: float = 0.0

    def front_filter(self, rate_hz: float, sim_center_hz: float) -> FirFilter:
        shift = self.front_bpf.center_hz - sim_center_hz
        return design_lowpass(self.front_bpf.bw_hz / 2.0, self.front_bpf.num_taps, rate_hz, shift_hz=shift)

    def ref_filter(self, rate_hz: float) -> FirFilter:
        r = self.ref_bpf
        return design_bandpass(r.center_hz, r.bw_hz, r.num_taps, rate_hz)

    def settling_samples(self) -> int:
        n = self.ref_bpf.num_taps - 1
        if self.front_enabled:
            n += self.front_bpf.num_taps - 1
        return n


@dataclass(frozen=True, eq=False)
class ExtractedClock:
    signal: SampleBuffer
    hop_instants_s: tuple[float, ...] = ()
    follower_id: int = 0
    follower_ppm: float = 0.0
    ref_band_hz: tuple[float, float] = (9e6, 11e6)
    ref_group_delay_s: float = 2.5e-6
    agc_saturated: bool = False


def lna_noise_variance(noise_figure_db: float, rate_hz: float) -> float:
    """Input-referred complex noise variance (F - 1) k T0 B in mW."""
    f = 10 ** (noise_figure_db / 10.0)
    return (f - 1.0) * 10 ** (KT0_DBM_HZ / 10.0) * rate_hz


class FrontStage:
    def __init__(self, cfg: ReceiverChainConfig, rate_hz: float, rng: Rng, sim_center_hz: float):
        self.cfg = cfg
        self.fir = StreamingFir(cfg.front_filter(rate_hz, sim_center_hz).taps) if cfg.front_enabled else None
        self.gain = 10 ** (cfg.lna.gain_db / 20.0)
        self.var = lna_noise_variance(cfg.lna.noise_figure_db, rate_hz)
        self.rng = rng

    def _lna(self, x: np.ndarray) -> np.ndarray:
        if self.var > 0:
            x = x + self.rng.complex_normals(len(x), self.var)
        return x * self.gain if self.gain != 1.0 else x

    def process(self, x: np.ndarray) -> np.ndarray:
        if self.cfg.lna_first:
            x = self._lna(x)
            return self.fir.process(x) if self.fir else x
        if self.fir:
            x = self.fir.process(x)
        return self._lna(x)


def front_stage(rx: SampleBuffer, cfg: ReceiverChainConfig, rng: Rng, sim_center_hz: float = 9e8) -> SampleBuffer:
    """Front band-pass over the hop band, then LNA gain with noise-figure noise."""
    st = FrontStage(cfg, rx.rate_hz, rng, sim_center_hz)
    extra = cfg.front_bpf.num_taps - 1 if cfg.front_enabled else 0
    return rx.with_samples(st.process(rx.samples), extra_settling=extra)


def mixer_gain(mixer_loss_db: float) -> float:
    return 10 ** (-mixer_loss_db / 10.0)


def square_law(x: np.ndarray, mixer_loss_db: float) -> np.ndarray:
    return 0.5 * mixer_gain(mixer_loss_db) * (x.real * x.real + x.imag * x.imag)


def square_law_mix(x: SampleBuffer, mixer_loss_db: float) -> SampleBuffer:
    """Ideal self-mixing, y = L/2 |s|^2.

    Squaring the real passband Re{s e^{j w t}} gives |s|^2/2 plus an image at
    twice the carrier that any real mixer output filter discards.
    """
    if x.kind != "complex-baseband":
        raise ConfigurationError("square_law_mix expects a complex-baseband buffer")
    return x.with_samples(square_law(x.samples, mixer_loss_db))


def ref_stage(y: SampleBuffer, cfg: ReceiverChainConfig) -> SampleBuffer:
    return fir_filter(y, cfg.ref_filter(y.rate_hz))


@numba.njit(cache=True, nogil=True)
def _agc_kernel(z, alpha, loop_gain, log_target, floor, g_max, rms2, g):
    out = np.empty_like(z)
    g_min = 1.0 / g_max
    last_sat = -1
    for n in range(z.shape[0]):
        v = g * z[n]
        rms2 = (1.0 - alpha) * rms2 + alpha * v * v
        rms = math.sqrt(rms2)
        if rms < floor:
            rms = floor
        g = g * math.exp(loop_gain * (log_target - math.log(rms)))
        if g > g_max:
            g = g_max
            last_sat = n
        elif g < g_min:
            g = g_min
        out[n] = g * z[n]
    return out, rms2, g, last_sat


class Agc:
    """Log-domain AGC loop.

    The running power estimate tracks the loop *output*
    (``g[n-1] * z[n]``); measuring the input instead would integrate
    without bound. ``last_saturated`` is the last sample index (from the
    start of the stream) at which the gain sat on its upper clamp, or -1.
    """

    def __init__(self, cfg: AgcConfig, rate_hz: float):
        self.cfg = cfg
        self.alpha = min(1.0, 1.0 / (rate_hz * cfg.rms_time_constant_s))
        self.g_max = 10 ** (cfg.max_gain_db / 20.0)
        self.rms2 = cfg.target_rms**2
        self.g = 1.0
        self.pos = 0
        self.last_saturated = -1

    def process(self, z: np.ndarray) -> np.ndarray:
        c = self.cfg
        out, self.rms2, self.g, sat = _agc_kernel(
            np.ascontiguousarray(z, dtype=np.float64), self.alpha, c.loop_gain,
            math.log(c.target_rms), c.rms_floor, self.g_max, self.rms2, self.g,
        )
        if sat >= 0:
            self.last_saturated = self.pos + sat
        self.pos += len(z)
        return out

    @property
    def saturated(self) -> bool:
        return self.last_saturated >= 0

    def saturated_after(self, n: int) -> bool:
        """Clamped at some sample >= n, i.e. not just start-up overshoot."""
        return self.last_saturated >= n


def agc(z: SampleBuffer, cfg: ReceiverChainConfig | AgcConfig) -> SampleBuffer:
    acfg = cfg.agc if isinstance(cfg, ReceiverChainConfig) else cfg
    loop = Agc(acfg, z.rate_hz)
    out = loop.process(z.samples)
    if loop.saturated:
        log.warning("AGC gain clamped at %.0f dB", acfg.max_gain_db)
    return z.with_samples(out)


class ReferenceExtractor:
    """Streaming composition of the chain for one follower."""

    def __init__(self, cfg: ReceiverChainConfig, rate_hz: float, rng: Rng, sim_center_hz: float = 9e8):
        self.cfg = cfg
        self.rate_hz = rate_hz
        self.front = FrontStage(cfg, rate_hz, rng, sim_center_hz)
        self.ref_fir_design = cfg.ref_filter(rate_hz)
        self.ref = StreamingFir(self.ref_fir_design.taps)
        self.agc = Agc(cfg.agc, rate_hz)

    def process(self, rx: np.ndarray) -> np.ndarray:
        y = square_law(self.front.process(rx), self.cfg.mixer_loss_db)
        return self.agc.process(self.ref.process(y))

    def clock(self, samples: np.ndarray, start_time_s: float, hop_instants=(), follower_id: int = 0,
              upstream_settling: int = 0) -> ExtractedClock:
        r = self.cfg.ref_bpf
        sig = SampleBuffer(samples, self.rate_hz, start_time_s,
                           settling_samples=upstream_settling + self.cfg.settling_samples())
        return ExtractedClock(
            signal=sig,
            hop_instants_s=tuple(float(t) for t in hop_instants),
            follower_id=follower_id,
            follower_ppm=self.cfg.follower_ppm,
            ref_band_hz=(r.center_hz - r.bw_hz / 2.0, r.center_hz + r.bw_hz / 2.0),
            ref_group_delay_s=self.ref_fir_design.group_delay_s,
            agc_saturated=self.agc.saturated,
        )


def extract_reference(rx: SampleBuffer, cfg: ReceiverChainConfig, hop_instants, rng: Rng,
                      sim_center_hz: float = 9e8, follower_id: int = 0) -> ExtractedClock:
    """Run the full chain. ``hop_instants`` is copied to the result, never read."""
    if rx.kind != "complex-baseband":
        raise ConfigurationError("extract_reference expects a complex-baseband buffer")
    ex = ReferenceExtractor(cfg, rx.rate_hz, rng, sim_center_hz)
    out = ex.process(rx.samples)
    if ex.agc.saturated:
        log.warning("follower %d: AGC gain clamped at %.0f dB", follower_id, cfg.agc.max_gain_db)
    return ex.clock(out, rx.start_time_s, hop_instants, follower_id, rx.settling_samples)


def to_square_wave(clk: ExtractedClock | SampleBuffer, hysteresis: float) -> SampleBuffer:
    """Comparator with a symmetric +/- hysteresis band; output in {-1, +1}."""
    buf = clk.signal if isinstance(clk, ExtractedClock) else clk
    x = buf.samples
    if not hysteresis > 0:
        raise ConfigurationError("hysteresis must be positive")
    rms = float(np.sqrt(np.mean(x * x)))
    if hysteresis >= rms:
        raise ConfigurationError(f"hysteresis {hysteresis:g} must be below signal RMS {rms:g}")
    decided = np.where(x > hysteresis, 1.0, np.where(x < -hysteresis, -1.0, 0.0))
    idx = np.where(decided != 0, np.arange(len(x)), 0)
    np.maximum.accumulate(idx, out=idx)
    out = decided[idx]
    first = 1.0 if x[0] >= 0 else -1.0
    out[out == 0] = first
    return buf.with_samples(out)


def rising_edges(square: np.ndarray) -> int:
    return int(np.count_nonzero((square[1:] > 0) & (square[:-1] < 0)))
