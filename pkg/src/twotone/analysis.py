"""Clock characterization: phase demodulation, regression frequency fit,
pairwise comparison, and hop-transient envelope metrics.

The extracted clock is modelled as cos(2 pi f t + phi0 + omega(t)). Mixing
with the nominal frequency leaves a slow phase whose least-squares slope
gives f - f_nominal.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import AnalysisError, ConfigurationError
from .follower import ExtractedClock
from .signal import design_lowpass

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class PhaseSeries:
    """Decimated phase/envelope of one clock, on the follower's local timebase."""

    times_s: np.ndarray
    phase_rad: np.ndarray
    envelope: np.ndarray
    decimated_rate_hz: float
    f_nominal_hz: float = 1e7
    valid_from_s: float = 0.0
    chain_delay_s: float = 0.0
    ref_group_delay_s: float = 2.5e-6
    follower_ppm: float = 0.0
    lp_delay_s: float = 0.0

    def __post_init__(self):
        n = len(self.times_s)
        if len(self.phase_rad) != n or len(self.envelope) != n:
            raise ConfigurationError("times, phase and envelope lengths differ")

    def to_local(self, t_global):
        return np.asarray(t_global) * (1.0 + 1e-6 * self.follower_ppm)


@dataclass
class TransientEvent:
    hop_time_s: float
    dip_depth: float
    settling_time_s: float
    saturated: bool = False
    detected: bool = False


@dataclass
class ClockMetrics:
    f_hat_hz: float
    phi0_hat_rad: float
    residual_rms_rad: float
    gated_fraction: float
    n_used: int = 0
    transient_events: list[TransientEvent] = field(default_factory=list)
    disturbed_fraction: float = 0.0
    follower_id: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["transients"] = d.pop("transient_events")
        return d


class PhaseDemodulator:
    """Streaming mix-to-zero, low-pass, decimate, unwrap."""

    def __init__(self, rate_hz: float, f_nominal_hz: float, lp_bw_hz: float, decim: int,
                 lp_taps: int = 1601, start_time_s: float = 0.0, follower_ppm: float = 0.0):
        if decim < 1:
            raise ConfigurationError("decim must be >= 1")
        if not 0 < lp_bw_hz < rate_hz / (2.0 * decim):
            raise ConfigurationError(
                f"lp_bw_hz {lp_bw_hz:g} must be below the decimated Nyquist {rate_hz / (2 * decim):g} Hz"
            )
        self.rate = rate_hz
        self.decim = decim
        self.scale = 1.0 + 1e-6 * follower_ppm
        self.start = start_time_s
        taps = design_lowpass(lp_bw_hz, lp_taps, rate_hz).taps
        # cycles of the local reference at global sample n: a*n + b
        self.a = f_nominal_hz * self.scale / rate_hz
        self.b = f_nominal_hz * self.scale * start_time_s
        # sum_k h[k] x[n-k] e^{-j2pi a (n-k)} = e^{-j2pi a n} sum_k (h[k] e^{j2pi a k}) x[n-k],
        # so the mixer folds into the taps and only decimated outputs are computed
        k = np.arange(lp_taps)
        mod = taps * np.exp(2j * np.pi * np.mod(self.a * k, 1.0))
        self.tap_matrix = np.stack([mod.real[::-1], mod.imag[::-1]], axis=1)
        self.history = np.zeros(lp_taps - 1)
        self.pos = 0
        self.last_phase: float | None = None

    def process(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if len(x) == 0:
            return np.zeros(0), np.zeros(0), np.zeros(0)
        ntap = self.tap_matrix.shape[0]
        ext = np.concatenate([self.history, x])
        first = (-self.pos) % self.decim
        idx = np.arange(self.pos + first, self.pos + len(x), self.decim)
        windows = sliding_window_view(ext, ntap)[first::self.decim]
        yr = windows @ self.tap_matrix
        cyc = self.a * idx + self.b
        y = 2.0 * (yr[:, 0] + 1j * yr[:, 1]) * np.exp(-2j * np.pi * (cyc - np.floor(cyc)))
        self.history = ext[len(ext) - (ntap - 1):]
        self.pos += len(x)
        ph = np.angle(y)
        if len(ph):
            if self.last_phase is not None:
                ph = np.unwrap(np.concatenate([[self.last_phase], ph]))[1:]
            else:
                ph = np.unwrap(ph)
            self.last_phase = float(ph[-1])
        t_local = (self.start + idx / self.rate) * self.scale
        return t_local, ph, np.abs(y)


def demodulate_phase(clk: ExtractedClock, f_nominal_hz: float = 1e7, lp_bw_hz: float = 5e4,
                     decim: int = 40, lp_taps: int = 1601) -> PhaseSeries:
    lo, hi = clk.ref_band_hz
    if not lo <= f_nominal_hz <= hi:
        raise ConfigurationError(f"f_nominal {f_nominal_hz:g} Hz outside reference band [{lo:g}, {hi:g}] Hz")
    sig = clk.signal
    if sig.kind != "real":
        raise ConfigurationError("extracted clock must be a real buffer")
    dem = PhaseDemodulator(sig.rate_hz, f_nominal_hz, lp_bw_hz, decim, lp_taps, sig.start_time_s, clk.follower_ppm)
    t, ph, env = dem.process(sig.samples)
    return finish_phase_series(t, ph, env, sig.rate_hz, decim, f_nominal_hz, sig.start_time_s,
                               sig.settling_samples + lp_taps - 1, clk.ref_group_delay_s, clk.follower_ppm,
                               lp_taps)


def finish_phase_series(t, ph, env, rate_hz, decim, f_nominal_hz, start_time_s, settling_samples,
                        ref_group_delay_s, follower_ppm, lp_taps: int = 1) -> PhaseSeries:
    scale = 1.0 + 1e-6 * follower_ppm
    return PhaseSeries(
        times_s=np.asarray(t), phase_rad=np.asarray(ph), envelope=np.asarray(env),
        decimated_rate_hz=rate_hz / decim,
        f_nominal_hz=f_nominal_hz,
        valid_from_s=(start_time_s + settling_samples / rate_hz) * scale,
        chain_delay_s=settling_samples / (2.0 * rate_hz),
        ref_group_delay_s=ref_group_delay_s,
        follower_ppm=follower_ppm,
        lp_delay_s=(lp_taps - 1) / (2.0 * rate_hz) * scale,
    )


def default_gates(ps: PhaseSeries, hop_instants_s, gate_multiplier: float = 3.0) -> list[tuple[float, float]]:
    """Settling prefix plus one gate per hop of ``gate_multiplier`` x total chain group delay.

    Hop instants are global time; gates are returned on the local timebase.
    """
    gates = [(-math.inf, ps.valid_from_s)]
    width = gate_multiplier * ps.chain_delay_s * (1.0 + 1e-6 * ps.follower_ppm)
    for th in ps.to_local(list(hop_instants_s)):
        gates.append((float(th), float(th) + width))
    return gates


def _gate_mask(times: np.ndarray, gates) -> tuple[np.ndarray, list[int]]:
    keep = np.ones(len(times), dtype=bool)
    removed = []
    for a, b in gates:
        lo, hi = np.searchsorted(times, [a, b], side="left")
        removed.append(int(np.count_nonzero(keep[lo:hi])))
        keep[lo:hi] = False
    return keep, removed


def ols_line(t: np.ndarray, y: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Slope, intercept (at t=0), residuals; centred sums for conditioning."""
    tm, ym = t.mean(), y.mean()
    dt = t - tm
    slope = float(np.dot(dt, y - ym) / np.dot(dt, dt))
    intercept = float(ym - slope * tm)
    return slope, intercept, y - (intercept + slope * t)


def fit_frequency(ps: PhaseSeries, gates=(), min_samples: int = 100) -> ClockMetrics:
    keep, removed = _gate_mask(ps.times_s, gates)
    n = int(keep.sum())
    if n < min_samples:
        worst = int(np.argmax(removed)) if removed else -1
        which = "no gates" if worst < 0 else (
            "settling prefix" if gates[worst][0] == -math.inf else f"hop gate at {gates[worst][0]:.6g} s"
        )
        raise AnalysisError(
            f"only {n} ungated samples (need {min_samples}); limiting gate: {which} "
            f"removed {removed[worst] if removed else 0} samples"
        )
    slope, icpt, res = ols_line(ps.times_s[keep], ps.phase_rad[keep])
    # each phase sample describes the clock lp_delay_s earlier; undo that in the intercept
    return ClockMetrics(
        f_hat_hz=ps.f_nominal_hz + slope / TWO_PI,
        phi0_hat_rad=float(np.mod(icpt + slope * ps.lp_delay_s, TWO_PI)),
        residual_rms_rad=float(np.sqrt(np.mean(res * res))),
        gated_fraction=1.0 - n / len(ps.times_s),
        n_used=n,
    )


def pairwise_differences(metrics) -> np.ndarray:
    if len(metrics) < 2:
        raise AnalysisError("pairwise comparison needs at least 2 followers")
    f = np.array([m.f_hat_hz for m in metrics])
    return f[:, None] - f[None, :]


def transient_metrics(ps: PhaseSeries, hop_instants_s, window_s: float, settle_band: float = 0.1,
                      settle_hold_s: float | None = None) -> list[TransientEvent]:
    """Envelope dip and settling time after each hop.

    dip_depth = 1 - min(envelope in window) / median(envelope outside all
    windows). Settling is the first instant after the last excursion beyond
    +/- settle_band of that median, searched up to the window end or next hop.
    If the envelope is still outside the band where the search stops, the
    event is marked saturated.
    """
    if window_s < 5 * ps.ref_group_delay_s:
        raise ConfigurationError(
            f"window_s {window_s:g} s must cover 5x the reference filter group delay "
            f"({5 * ps.ref_group_delay_s:g} s)"
        )
    hops = [float(h) for h in ps.to_local(list(hop_instants_s))]
    if not hops:
        return []
    t, env = ps.times_s, ps.envelope
    win = window_s * (1.0 + 1e-6 * ps.follower_ppm)
    hold = settle_hold_s if settle_hold_s is not None else ps.ref_group_delay_s
    outside = t >= ps.valid_from_s
    for h in hops:
        outside &= ~((t >= h) & (t < h + win))
    if not outside.any():
        raise AnalysisError("no envelope samples outside transient windows")
    ref = float(np.median(env[outside]))
    if ref <= 0:
        raise AnalysisError("envelope median is zero")
    hold_n = max(1, int(math.ceil(hold * ps.decimated_rate_hz)))
    dt = 1.0 / ps.decimated_rate_hz
    events = []
    for i, h in enumerate(hops):
        if h < ps.valid_from_s:
            continue
        nxt = hops[i + 1] if i + 1 < len(hops) else t[-1] + dt
        end = min(h + win, nxt)
        lo, hi = np.searchsorted(t, [h, end])
        seg = env[lo:hi]
        if len(seg) == 0:
            continue
        dip = float(np.clip(1.0 - seg.min() / ref, 0.0, 1.0))
        bad = np.abs(seg / ref - 1.0) > settle_band
        saturated = False
        if not bad.any():
            settle = 0.0
        else:
            last = int(np.flatnonzero(bad)[-1])
            if len(seg) - 1 - last < hold_n:
                saturated = True
                settle = float(end - h)
            else:
                settle = float(t[lo + last] + dt - h)
        events.append(TransientEvent(h, dip, max(settle, 0.0), saturated))
    return events


def detect_dips(ps: PhaseSeries, events, hop_instants_s, window_s: float, floor: float = 1e-4) -> float:
    """Flag events whose dip exceeds what the envelope does with no hop at all.

    The threshold is the larger of ``floor`` and the deepest dip seen in
    control windows of the same length placed midway between hops. Sets
    ``event.detected`` in place and returns the threshold.
    """
    hops = [float(h) for h in ps.to_local(list(hop_instants_s))]
    t, env = ps.times_s, ps.envelope
    win = window_s * (1.0 + 1e-6 * ps.follower_ppm)
    outside = t >= ps.valid_from_s
    for h in hops:
        outside &= ~((t >= h) & (t < h + win))
    ref = float(np.median(env[outside])) if outside.any() else 0.0
    if ref <= 0:
        raise AnalysisError("envelope median is zero")
    bounds = hops + [float(t[-1])]
    worst = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        m = 0.5 * (a + b)
        if m + win > b:
            continue
        lo, hi = np.searchsorted(t, [m, m + win])
        if hi > lo:
            worst = max(worst, 1.0 - float(env[lo:hi].min()) / ref)
    thr = max(floor, worst)
    for e in events:
        e.detected = e.dip_depth > thr
    return thr


def disturbed_fraction(events, dwell_s: float, total_s: float) -> float:
    if not total_s > 0:
        raise ConfigurationError("total_s must be positive")
    return min(1.0, sum(e.settling_time_s for e in events) / total_s)


def ols_slope_std(sigma_rad: float, n: int, duration_s: float) -> float:
    """Closed-form std of the fitted frequency (Hz) under white phase noise."""
    return sigma_rad * math.sqrt(12.0 / (n * duration_s**2)) / TWO_PI
