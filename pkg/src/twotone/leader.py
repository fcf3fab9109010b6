"""Leader transmitter: hop schedule and frequency-hopped two-tone synthesis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigurationError
from .rng import Rng
from .signal import OscillatorModel, OscillatorPhase, SampleBuffer

DEFAULT_CENTERS_HZ = (890e6, 895e6, 900e6, 905e6, 910e6)
PHASE_CONTINUOUS = "continuous"
PHASE_RANDOM = "random"


@dataclass(frozen=True)
class TwoToneConfig:
    delta_f_hz: float = 1e7
    sim_center_hz: float = 9e8
    tone_amplitude: float = 1.0
    pa_gain_db: float = 0.0
    pa_output_ceiling: float | None = None
    phase_mode: str = PHASE_CONTINUOUS

    def __post_init__(self):
        if not self.delta_f_hz > 0:
            raise ConfigurationError("delta_f_hz must be positive", path="delta_f_hz")
        if not self.tone_amplitude > 0:
            raise ConfigurationError("tone_amplitude must be positive", path="tone_amplitude")
        if self.pa_output_ceiling is not None and not self.pa_output_ceiling > 0:
            raise ConfigurationError("pa_output_ceiling must be positive", path="pa_output_ceiling")
        if self.phase_mode not in (PHASE_CONTINUOUS, PHASE_RANDOM):
            raise ConfigurationError(f"phase_mode must be 'continuous' or 'random', got {self.phase_mode!r}",
                                     path="phase_mode")

    def tone_offsets(self, center_hz: float) -> tuple[float, float]:
        off = center_hz - self.sim_center_hz
        return off - self.delta_f_hz / 2.0, off + self.delta_f_hz / 2.0

    def check_nyquist(self, centers_hz, rate_hz: float):
        for c in centers_hz:
            edge = abs(c - self.sim_center_hz) + self.delta_f_hz / 2.0
            if edge >= rate_hz / 2.0:
                raise ConfigurationError(
                    f"tones at center {c / 1e6:g} MHz reach {edge / 1e6:g} MHz from sim center, "
                    f"beyond Nyquist {rate_hz / 2e6:g} MHz"
                )


@dataclass(frozen=True)
class HopSchedule:
    centers_hz: tuple[float, ...] = DEFAULT_CENTERS_HZ
    dwell_s: float = 1.0
    total_duration_s: float = 1.0
    fixed_sequence: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(self.centers_hz) == 0:
            raise ConfigurationError("centers_hz must not be empty", path="centers_hz")
        if not self.dwell_s > 0:
            raise ConfigurationError("dwell_s must be positive", path="dwell_s")
        if not self.total_duration_s > 0:
            raise ConfigurationError("total_duration_s must be positive", path="total_duration_s")
        if self.fixed_sequence is not None:
            if len(self.fixed_sequence) == 0:
                raise ConfigurationError("fixed_sequence must not be empty", path="fixed_sequence")
            bad = [i for i in self.fixed_sequence if not 0 <= i < len(self.centers_hz)]
            if bad:
                raise ConfigurationError(f"fixed_sequence indices out of range: {bad}", path="fixed_sequence")

    @property
    def n_segments(self) -> int:
        # tolerate 0.5/0.1 == 5.000000000000001
        return max(1, math.ceil(self.total_duration_s / self.dwell_s - 1e-9))


def hop_sample_index(t_s: float, rate_hz: float) -> int:
    """floor(t * rate), snapping values within 1e-6 of an integer to it."""
    x = t_s * rate_hz
    r = round(x)
    return int(r) if abs(x - r) < 1e-6 else int(math.floor(x))


def generate_hop_sequence(schedule: HopSchedule, rng: Rng) -> list[tuple[float, float]]:
    """(start_s, center_hz) per dwell segment.

    Random patterns draw ``rng_next() % len(centers)`` independently per
    segment; a fixed sequence is cycled.
    """
    if schedule.total_duration_s < schedule.dwell_s:
        raise ConfigurationError("total_duration_s must be >= dwell_s", path="total_duration_s")
    n = schedule.n_segments
    k = len(schedule.centers_hz)
    if schedule.fixed_sequence is not None:
        seq = schedule.fixed_sequence
        idx = [seq[i % len(seq)] for i in range(n)]
    else:
        idx = [rng.next_u64() % k for _ in range(n)]
    return [(i * schedule.dwell_s, schedule.centers_hz[j]) for i, j in enumerate(idx)]


def hop_instants(hops: list[tuple[float, float]]) -> list[float]:
    """Segment boundaries after the first, i.e. the instants a hop happens."""
    return [start for start, _ in hops[1:]]


@numba.njit(cache=True, nogil=True)
def _fill_segment(out, acc0, acc1, f0, f1, t_seg, t_first, rate, eps_ppm, drift_ppm, theta, amp):
    # tone k phase: acc_k + 2 pi f_k * integral_{t_seg}^{t} (1 + 1e-6 (eps + drift t')) dt'
    for i in range(out.shape[0]):
        t = t_first + i / rate
        dt = t - t_seg
        dtau = dt * (1.0 + 1e-6 * eps_ppm) + 0.5e-6 * drift_ppm * dt * (t + t_seg)
        p0 = acc0 + 2.0 * math.pi * f0 * dtau
        p1 = acc1 + 2.0 * math.pi * f1 * dtau
        # e^{j p0} + e^{j p1} == 2 cos((p1 - p0)/2) e^{j (p0 + p1)/2}
        mag = 2.0 * amp * math.cos(0.5 * (p1 - p0))
        mean = 0.5 * (p0 + p1) + theta[i]
        out[i] = complex(mag * math.cos(mean), mag * math.sin(mean))


class TwoToneSource:
    """Streaming synthesizer; ``next(n)`` returns the next ``n`` samples.

    Each tone owns a phase accumulator that is carried across segment
    boundaries (continuous mode) or redrawn uniformly at each boundary
    (random mode). Both tones share one oscillator phase-noise path.
    """

    def __init__(self, cfg: TwoToneConfig, hops, osc: OscillatorModel, rate_hz: float, rng: Rng,
                 duration_s: float, start_time_s: float = 0.0):
        if not hops:
            raise ConfigurationError("hop list is empty")
        cfg.check_nyquist([c for _, c in hops], rate_hz)
        self.cfg, self.osc, self.rate = cfg, osc, rate_hz
        self.start_time_s = start_time_s
        self.n_total = hop_sample_index(duration_s, rate_hz)
        if self.n_total < 1:
            raise ConfigurationError("duration shorter than one sample")
        starts = [hop_sample_index(s, rate_hz) for s, _ in hops]
        starts[0] = 0
        self.seg_starts = starts
        self.seg_centers = [c for _, c in hops]
        self.phase_noise = OscillatorPhase(osc, rate_hz, Rng(rng.next_u64()))
        self.phase_rng = Rng(rng.next_u64())
        self.pos = 0
        self.seg = -1
        self.acc = np.zeros(2)
        self._enter_segment(0)

    def _t(self, n):
        return self.start_time_s + np.asarray(n) / self.rate

    def _enter_segment(self, seg: int):
        if self.seg >= 0:
            if self.cfg.phase_mode == PHASE_RANDOM:
                self.acc = 2 * np.pi * self.phase_rng.uniforms(2)
            else:
                self.acc = np.mod(self.acc + self._advance(self.seg_starts[seg]), 2 * np.pi)
        self.seg = seg
        self.f = np.array(self.cfg.tone_offsets(self.seg_centers[seg]))

    def _advance(self, n):
        """Phase each tone has gained since the current segment start, at sample n."""
        n0 = self.seg_starts[self.seg]
        dtau = self.osc.warped_interval(self._t(n0), self._t(n))
        return 2 * np.pi * np.multiply.outer(np.asarray(dtau), self.f).T

    def next(self, n: int) -> np.ndarray:
        n = min(n, self.n_total - self.pos)
        out = np.empty(n, dtype=np.complex128)
        theta = self.phase_noise.next(n) if n else np.zeros(0)
        a = self.cfg.tone_amplitude
        i = 0
        while i < n:
            g = self.pos + i
            nxt = self.seg + 1
            if nxt < len(self.seg_starts) and g >= self.seg_starts[nxt]:
                self._enter_segment(nxt)
                continue
            end = self.seg_starts[nxt] if nxt < len(self.seg_starts) else self.n_total
            m = min(end, self.pos + n) - g
            _fill_segment(out[i:i + m], self.acc[0], self.acc[1], self.f[0], self.f[1],
                          float(self._t(self.seg_starts[self.seg])), float(self._t(g)), self.rate,
                          self.osc.ppm_offset, self.osc.drift_ppm_per_s, theta[i:i + m], a)
            i += m
        self.pos += n
        return out

    @property
    def done(self) -> bool:
        return self.pos >= self.n_total


def synthesize_two_tone(cfg: TwoToneConfig, hops, leader_osc: OscillatorModel, rate_hz: float, rng: Rng,
                        duration_s: float | None = None, start_time_s: float = 0.0) -> SampleBuffer:
    """Complex-baseband two-tone waveform following ``hops``.

    ``duration_s`` defaults to the end of the last segment implied by equal
    spacing of the hop starts (or one second for a single segment).
    """
    if duration_s is None:
        if len(hops) > 1:
            duration_s = hops[-1][0] + (hops[1][0] - hops[0][0])
        else:
            duration_s = 1.0
    src = TwoToneSource(cfg, hops, leader_osc, rate_hz, rng, duration_s, start_time_s)
    return SampleBuffer(src.next(src.n_total), rate_hz, start_time_s)


def apply_pa(buffer: SampleBuffer, cfg: TwoToneConfig) -> SampleBuffer:
    return buffer.with_samples(pa_transfer(buffer.samples, cfg))


def pa_transfer(x: np.ndarray, cfg: TwoToneConfig) -> np.ndarray:
    """Linear gain, then optional tanh soft clip on magnitude with phase kept."""
    y = x * 10 ** (cfg.pa_gain_db / 20.0) if cfg.pa_gain_db else x.copy()
    c = cfg.pa_output_ceiling
    if c is not None:
        mag = np.abs(y)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(mag > 0, c * np.tanh(mag / c) / mag, 1.0)
        y = y * scale
    return y
