"""Leader-to-follower propagation: free-space loss, AWGN, interferers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .rng import Rng
from .signal import SampleBuffer

SPEED_OF_LIGHT = 299_792_458.0
CW, SWEPT, PULSED_CW = "cw", "swept", "pulsed-cw"


def fspl_db(distance_m: float, freq_hz: float) -> float:
    return 20.0 * math.log10(4.0 * math.pi * distance_m * freq_hz / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class ChannelConfig:
    """Flat line-of-sight channel.

    Exactly one of ``noise_density_dbm_hz`` and ``target_snr_db`` is set;
    ``-inf`` density means noiseless. Signal power is in mW per |x|^2, so a
    tone of amplitude 1 carries 0 dBm. SNR is per-tone power over noise power
    in ``snr_bandwidth_hz`` (the reference filter bandwidth).
    """

    distance_m: float = 3.0
    carrier_for_fspl_hz: float = 9e8
    noise_density_dbm_hz: float | None = None
    target_snr_db: float | None = 20.0
    extra_loss_db: float = 0.0
    snr_bandwidth_hz: float = 2e6

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ConfigurationError("distance_m must be positive", path="distance_m")
        if (self.noise_density_dbm_hz is None) == (self.target_snr_db is None):
            raise ConfigurationError("exactly one of noise_density_dbm_hz / target_snr_db must be set")
        if not self.snr_bandwidth_hz > 0:
            raise ConfigurationError("snr_bandwidth_hz must be positive", path="snr_bandwidth_hz")

    @property
    def loss_db(self) -> float:
        return fspl_db(self.distance_m, self.carrier_for_fspl_hz) + self.extra_loss_db

    @property
    def amplitude_scale(self) -> float:
        return 10 ** (-self.loss_db / 20.0)

    def noise_variance(self, rate_hz: float, tx_tone_amplitude: float) -> float:
        """Per-sample complex noise variance E|n|^2."""
        if self.noise_density_dbm_hz is not None:
            if self.noise_density_dbm_hz == -math.inf:
                return 0.0
            return 10 ** (self.noise_density_dbm_hz / 10.0) * rate_hz
        tone_power = (tx_tone_amplitude * self.amplitude_scale) ** 2
        density = tone_power / (10 ** (self.target_snr_db / 10.0) * self.snr_bandwidth_hz)
        return density * rate_hz


class Propagator:
    """Streaming per-follower channel; each follower draws noise from its own sub-stream."""

    def __init__(self, cfg: ChannelConfig, n_followers: int, rng: Rng, rate_hz: float,
                 tx_tone_amplitude: float):
        if n_followers < 1:
            raise ConfigurationError("n_followers must be >= 1", path="n_followers")
        self.scale = cfg.amplitude_scale
        self.variance = cfg.noise_variance(rate_hz, tx_tone_amplitude)
        self.rngs = [rng.spawn(f"follower/{i}/channel") for i in range(n_followers)]

    def process_one(self, i: int, tx: np.ndarray) -> np.ndarray:
        y = tx * self.scale
        if self.variance > 0:
            y = y + self.rngs[i].complex_normals(len(tx), self.variance)
        return y


def propagate(tx: SampleBuffer, cfg: ChannelConfig, n_followers: int, rng: Rng,
              tx_tone_amplitude: float | None = None) -> list[SampleBuffer]:
    """Scale by -(FSPL + extra loss) dB and add independent AWGN per follower.

    ``tx_tone_amplitude`` anchors SNR mode; when omitted it is inferred from
    the mean power of ``tx`` assuming two equal tones.
    """
    if tx_tone_amplitude is None:
        tx_tone_amplitude = math.sqrt(float(np.mean(np.abs(tx.samples) ** 2)) / 2.0)
    prop = Propagator(cfg, n_followers, rng, tx.rate_hz, tx_tone_amplitude)
    return [tx.with_samples(prop.process_one(i, tx.samples)) for i in range(n_followers)]


@dataclass(frozen=True)
class Interferer:
    """Jammer model; ``power_rel_db`` is J/S relative to one received tone."""

    kind: str = CW
    freq_hz: float = 905e6
    power_rel_db: float = 0.0
    sweep_rate_hz_per_s: float = 0.0
    duty_cycle: float = 1.0
    period_s: float = 1e-3
    phase_seed: int = 0

    def __post_init__(self):
        if self.kind not in (CW, SWEPT, PULSED_CW):
            raise ConfigurationError(f"interferer kind must be one of cw/swept/pulsed-cw, got {self.kind!r}")
        if not 0.0 <= self.duty_cycle <= 1.0:
            raise ConfigurationError("duty_cycle must be in [0, 1]", path="duty_cycle")
        if not self.period_s > 0:
            raise ConfigurationError("period_s must be positive", path="period_s")

    @property
    def initial_phase(self) -> float:
        return 2.0 * math.pi * float(Rng(self.phase_seed).uniforms(1)[0])

    def check_band(self, sim_center_hz: float, rate_hz: float, t_start: float, t_end: float):
        offs = [self.freq_hz - sim_center_hz]
        if self.kind == SWEPT:
            offs += [offs[0] + self.sweep_rate_hz_per_s * t for t in (t_start, t_end)]
        for off in offs:
            if abs(off) >= rate_hz / 2.0:
                raise ConfigurationError(
                    f"interferer at {(off + sim_center_hz) / 1e6:g} MHz falls outside the simulated band "
                    f"{sim_center_hz / 1e6:g} +/- {rate_hz / 2e6:g} MHz"
                )

    def waveform(self, t: np.ndarray, sim_center_hz: float, ref_tone_amplitude: float) -> np.ndarray:
        """Closed form in absolute time, so chunked generation matches one-shot."""
        amp = ref_tone_amplitude * 10 ** (self.power_rel_db / 20.0)
        f0 = self.freq_hz - sim_center_hz
        cycles = f0 * t
        if self.kind == SWEPT:
            cycles = cycles + 0.5 * self.sweep_rate_hz_per_s * t * t
        z = amp * np.exp(1j * (2.0 * np.pi * np.mod(cycles, 1.0) + self.initial_phase))
        if self.kind == PULSED_CW:
            z = z * (np.mod(t, self.period_s) < self.duty_cycle * self.period_s)
        return z


def add_interferer(rx: SampleBuffer, intf: Interferer, sim_center_hz: float,
                   ref_tone_amplitude: float) -> SampleBuffer:
    if intf.power_rel_db == -math.inf:
        return rx
    t = rx.times()
    intf.check_band(sim_center_hz, rx.rate_hz, float(t[0]), float(t[-1]))
    return rx.with_samples(rx.samples + intf.waveform(t, sim_center_hz, ref_tone_amplitude))
