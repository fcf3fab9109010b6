"""Sample buffers, oscillator phase, and windowed-sinc FIR filtering."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal as sps

from .errors import ConfigurationError
from .rng import Rng

COMPLEX_BASEBAND = "complex-baseband"
REAL = "real"


@dataclass(frozen=True, eq=False)
class SampleBuffer:
    """Uniformly sampled signal.

    ``settling_samples`` counts leading samples still influenced by the zero
    initial history of upstream FIR filters; analysis must gate them.
    """

    samples: np.ndarray
    rate_hz: float
    start_time_s: float = 0.0
    settling_samples: int = 0

    def __post_init__(self):
        if not self.rate_hz > 0:
            raise ConfigurationError(f"rate_hz must be positive, got {self.rate_hz}")
        arr = np.asarray(self.samples)
        if arr.ndim != 1 or arr.size == 0:
            raise ConfigurationError("samples must be a non-empty 1-D sequence", path="samples")
        if np.iscomplexobj(arr):
            arr = arr.astype(np.complex128, copy=False)
        else:
            arr = arr.astype(np.float64, copy=False)
        object.__setattr__(self, "samples", arr)

    @property
    def kind(self) -> str:
        return COMPLEX_BASEBAND if np.iscomplexobj(self.samples) else REAL

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.rate_hz

    def __len__(self) -> int:
        return len(self.samples)

    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(len(self.samples)) / self.rate_hz

    def with_samples(self, samples: np.ndarray, extra_settling: int = 0) -> "SampleBuffer":
        return replace(self, samples=samples, settling_samples=self.settling_samples + extra_settling)


@dataclass(frozen=True)
class OscillatorModel:
    ppm_offset: float = 0.0
    drift_ppm_per_s: float = 0.0
    phase_noise_diffusion: float = 0.0
    initial_phase_rad: float = 0.0

    def __post_init__(self):
        if self.phase_noise_diffusion < 0:
            raise ConfigurationError("phase_noise_diffusion must be >= 0", path="phase_noise_diffusion")

    def scale(self, t):
        """Instantaneous frequency multiplier (1 + eps + drift*t), eps in ppm."""
        return 1.0 + 1e-6 * (self.ppm_offset + self.drift_ppm_per_s * np.asarray(t))

    def warped_interval(self, t0: float, t):
        """Integral of ``scale`` from t0 to t.

        A tone with nominal offset f accumulates 2*pi*f*warped_interval phase.
        Written in difference form to keep precision over long captures.
        """
        dt = np.asarray(t) - t0
        return dt * (1.0 + 1e-6 * self.ppm_offset) + 0.5e-6 * self.drift_ppm_per_s * dt * (np.asarray(t) + t0)


class OscillatorPhase:
    """Streaming generator of phi0 + omega(t), a Wiener phase process."""

    def __init__(self, model: OscillatorModel, rate_hz: float, rng: Rng):
        self.model = model
        self.sigma = np.sqrt(model.phase_noise_diffusion / rate_hz)
        self.rng = rng
        self._last: float | None = None

    def next(self, n: int) -> np.ndarray:
        if self.sigma == 0.0:
            inc = np.zeros(n)
        else:
            inc = self.rng.normals(n) * self.sigma
        if self._last is None:
            inc[0] = 0.0
            start = self.model.initial_phase_rad
        else:
            start = self._last
        out = start + np.cumsum(inc)
        self._last = float(out[-1])
        return out


def oscillator_phase(model: OscillatorModel, n_samples: int, rate_hz: float, rng: Rng) -> np.ndarray:
    """phi0 + omega(t) sampled at ``rate_hz``; increments are N(0, D/rate)."""
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1", path="n_samples")
    return OscillatorPhase(model, rate_hz, rng).next(n_samples)


@dataclass(frozen=True, eq=False)
class FirFilter:
    taps: np.ndarray
    design_center_hz: float
    design_bw_hz: float
    rate_hz: float

    @property
    def num_taps(self) -> int:
        return len(self.taps)

    @property
    def group_delay_s(self) -> float:
        return (len(self.taps) - 1) / (2.0 * self.rate_hz)

    def response(self, freqs_hz) -> np.ndarray:
        """H(f) = sum_k taps[k] exp(-j 2 pi f k / rate), evaluated directly."""
        f = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
        k = np.arange(len(self.taps))
        return np.exp(-2j * np.pi * np.outer(f, k) / self.rate_hz) @ self.taps


def _sinc_lowpass(cutoff_hz: float, num_taps: int, rate_hz: float) -> np.ndarray:
    m = np.arange(num_taps) - (num_taps - 1) / 2.0
    fc = cutoff_hz / rate_hz
    return 2.0 * fc * np.sinc(2.0 * fc * m)


def _check_taps(num_taps: int):
    if num_taps % 2 == 0:
        raise ConfigurationError(f"num_taps must be odd, got {num_taps}")
    if num_taps < 11:
        raise ConfigurationError(f"num_taps must be >= 11, got {num_taps}")


def design_bandpass(center_hz: float, bw_hz: float, num_taps: int, rate_hz: float) -> FirFilter:
    """Hamming-windowed sinc band-pass as the difference of two low-pass prototypes.

    Normalised to exactly unit gain at ``center_hz``.
    """
    _check_taps(num_taps)
    lo, hi = center_hz - bw_hz / 2.0, center_hz + bw_hz / 2.0
    if bw_hz <= 0 or lo <= 0 or hi >= rate_hz / 2.0:
        raise ConfigurationError(
            f"band [{lo:g}, {hi:g}] Hz must lie strictly inside (0, {rate_hz / 2:g}) Hz"
        )
    win = np.hamming(num_taps)
    taps = (_sinc_lowpass(hi, num_taps, rate_hz) - _sinc_lowpass(lo, num_taps, rate_hz)) * win
    proto = FirFilter(taps, center_hz, bw_hz, rate_hz)
    taps = taps / abs(proto.response(center_hz)[0])
    return FirFilter(taps, center_hz, bw_hz, rate_hz)


def design_lowpass(cutoff_hz: float, num_taps: int, rate_hz: float, shift_hz: float = 0.0) -> FirFilter:
    """Hamming-windowed sinc low-pass with unit DC gain.

    A nonzero ``shift_hz`` modulates the prototype into a complex band-pass of
    width ``2 * cutoff_hz`` centred at ``shift_hz`` (for complex baseband).
    """
    _check_taps(num_taps)
    if cutoff_hz <= 0 or abs(shift_hz) + cutoff_hz >= rate_hz / 2.0:
        raise ConfigurationError(
            f"low-pass cutoff {cutoff_hz:g} Hz at shift {shift_hz:g} Hz exceeds Nyquist {rate_hz / 2:g} Hz"
        )
    taps = _sinc_lowpass(cutoff_hz, num_taps, rate_hz) * np.hamming(num_taps)
    taps = taps / taps.sum()
    if shift_hz:
        k = np.arange(num_taps) - (num_taps - 1) / 2.0
        taps = taps * np.exp(2j * np.pi * shift_hz * k / rate_hz)
    return FirFilter(taps, shift_hz, 2.0 * cutoff_hz, rate_hz)


class StreamingFir:
    """FIR with carried input history, so chunked and one-shot filtering agree."""

    def __init__(self, taps: np.ndarray):
        self.taps = np.asarray(taps)
        self.history = np.zeros(len(taps) - 1)

    def process(self, x: np.ndarray) -> np.ndarray:
        hist = self.history
        if np.iscomplexobj(x) and not np.iscomplexobj(hist):
            hist = hist.astype(np.complex128)
        ext = np.concatenate([hist, x])
        y = sps.convolve(ext, self.taps, mode="valid")
        self.history = ext[len(ext) - (len(self.taps) - 1):] if len(self.taps) > 1 else hist
        return y


def filter(buffer: SampleBuffer, filt: FirFilter) -> SampleBuffer:  # noqa: A001 - domain name
    """Causal FIR with zero initial history; output aligned with input."""
    if buffer.rate_hz != filt.rate_hz:
        raise ConfigurationError(
            f"buffer rate {buffer.rate_hz:g} Hz does not match filter rate {filt.rate_hz:g} Hz"
        )
    y = StreamingFir(filt.taps).process(buffer.samples)
    if not np.iscomplexobj(buffer.samples) and not np.iscomplexobj(filt.taps):
        y = y.real
    return buffer.with_samples(y, extra_settling=filt.num_taps - 1)
