"""Scenario schema: strict JSON loading, validation, canonical digest."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .channel import ChannelConfig, Interferer
from .errors import ConfigurationError
from .follower import ReceiverChainConfig
from .leader import DEFAULT_CENTERS_HZ, PHASE_CONTINUOUS, HopSchedule, TwoToneConfig
from .signal import OscillatorModel, design_lowpass


@dataclass(frozen=True)
class TwoToneSection:
    delta_f_hz: float = 1e7
    tone_amplitude: float = 1.0
    pa_gain_db: float = 0.0
    pa_output_ceiling: float | None = None
    phase_mode: str = PHASE_CONTINUOUS


@dataclass(frozen=True)
class HopSection:
    centers_hz: tuple[float, ...] = DEFAULT_CENTERS_HZ
    dwell_s: float = 1.0
    fixed_sequence: tuple[int, ...] | None = None


@dataclass(frozen=True)
class AnalysisConfig:
    f_nominal_hz: float = 1e7
    lp_bw_hz: float = 5e4
    lp_taps: int = 1601
    decim: int = 40
    gate_multiplier: float = 3.0
    window_s: float = 5e-4
    settle_band: float = 0.1
    detect_floor: float = 1e-4


@dataclass(frozen=True)
class OutputConfig:
    chunk_samples: int = 1 << 20
    clock_csv_samples: int = 4000
    spectrum_nfft: int = 8192
    write_phase_csv: bool = False


def _default_followers() -> tuple[ReceiverChainConfig, ...]:
    return (ReceiverChainConfig(), ReceiverChainConfig(), ReceiverChainConfig())


@dataclass(frozen=True)
class Scenario:
    """Complete, validated description of one simulation run.

    An empty JSON object yields the demonstration setup: five centers
    890-910 MHz hopping every second, 10 MHz tone spacing, followers 3 m away.
    """

    master_seed: int = 1
    rate_hz: float = 4e7
    sim_center_hz: float = 9e8
    duration_s: float = 2.0
    two_tone: TwoToneSection = field(default_factory=TwoToneSection)
    leader_oscillator: OscillatorModel = field(default_factory=lambda: OscillatorModel(phase_noise_diffusion=1.0))
    hops: HopSection = field(default_factory=HopSection)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    interferers: tuple[Interferer, ...] = ()
    followers: tuple[ReceiverChainConfig, ...] = field(default_factory=_default_followers)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def two_tone_config(self) -> TwoToneConfig:
        t = self.two_tone
        return TwoToneConfig(t.delta_f_hz, self.sim_center_hz, t.tone_amplitude, t.pa_gain_db,
                             t.pa_output_ceiling, t.phase_mode)

    def hop_schedule(self) -> HopSchedule:
        h = self.hops
        return HopSchedule(h.centers_hz, h.dwell_s, self.duration_s, h.fixed_sequence)

    def replace(self, **kw) -> "Scenario":
        return dataclasses.replace(self, **kw)


# --- generic strict (de)serialization -------------------------------------------------

def _strip_optional(tp):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return tp, False


def _convert(tp, value, path: str):
    tp, optional = _strip_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigurationError("must not be null", path=path)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    origin = typing.get_origin(tp)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError("expected a list", path=path)
        (item_tp, _ellipsis) = typing.get_args(tp)
        return tuple(_convert(item_tp, v, f"{path}[{i}]") for i, v in enumerate(value))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigurationError("expected true/false", path=path)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigurationError("expected an integer", path=path)
        return value
    if tp is float:
        if isinstance(value, str) and value.lower() in ("-inf", "inf", "+inf"):
            return float(value)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError("expected a number", path=path)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigurationError("expected a string", path=path)
        return value
    raise TypeError(f"unsupported schema type {tp!r} at {path}")


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigurationError("expected an object", path=path or "<root>")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigurationError(f"unknown key (valid keys: {', '.join(sorted(names))})", path=where)
    kwargs = {}
    for name in names:
        if name in data:
            kwargs[name] = _convert(hints[name], data[name], f"{path}.{name}" if path else name)
    # a chosen SNR mode should not collide with the default noise-density mode and vice versa
    if cls is ChannelConfig:
        if "noise_density_dbm_hz" in data and "target_snr_db" not in data:
            kwargs["target_snr_db"] = None
    try:
        return cls(**kwargs)
    except ConfigurationError as e:
        sub = e.path or ""
        full = ".".join(p for p in (path, sub) if p)
        raise ConfigurationError(e.message, path=full or None) from None


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def scenario_to_dict(sc: Scenario) -> dict:
    return _to_plain(sc)


def scenario_from_dict(data: dict) -> Scenario:
    sc = _build(Scenario, data, "")
    validate(sc)
    return sc


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"invalid JSON: {e}", path=str(path)) from None
    return scenario_from_dict(data)


def canonical_json(data) -> str:
    """Sorted keys, no whitespace, shortest round-trip float repr."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=True)


def scenario_digest(sc: Scenario) -> str:
    return hashlib.sha256(canonical_json(scenario_to_dict(sc)).encode()).hexdigest()


def scalar_paths(data, prefix: str = "") -> list[str]:
    """Dotted paths of every scalar leaf; list items are addressed as name[i]."""
    out = []
    if isinstance(data, dict):
        for k in sorted(data):
            out += scalar_paths(data[k], f"{prefix}.{k}" if prefix else k)
    elif isinstance(data, list):
        if all(not isinstance(v, (dict, list)) for v in data):
            out.append(prefix)
        for i, v in enumerate(data):
            if isinstance(v, (dict, list)):
                out += scalar_paths(v, f"{prefix}[{i}]")
    else:
        out.append(prefix)
    return out


def _split_path(path: str):
    parts = []
    for piece in path.split("."):
        name, _, rest = piece.partition("[")
        if name:
            parts.append(name)
        while rest:
            idx, _, rest = rest.partition("]")
            parts.append(int(idx))
            rest = rest.lstrip("[")
    return parts


def set_path(data: dict, path: str, value) -> dict:
    """Copy of ``data`` with the scalar at ``path`` replaced."""
    valid = scalar_paths(data)
    if path not in valid:
        raise ConfigurationError(f"not a scalar scenario field; valid paths: {', '.join(valid)}", path=path)
    data = json.loads(canonical_json(data))
    node = data
    parts = _split_path(path)
    for p in parts[:-1]:
        node = node[p]
    node[parts[-1]] = value
    return data


def validate(sc: Scenario):
    """Cross-field checks, all before any synthesis."""
    if not sc.rate_hz > 0:
        raise ConfigurationError("must be positive", path="rate_hz")
    if not sc.duration_s > 0:
        raise ConfigurationError("must be positive", path="duration_s")
    if sc.duration_s < sc.hops.dwell_s:
        raise ConfigurationError("must be >= hops.dwell_s", path="duration_s")
    nyq = sc.rate_hz / 2.0
    for i, c in enumerate(sc.hops.centers_hz):
        edge = abs(c - sc.sim_center_hz) + sc.two_tone.delta_f_hz / 2.0
        if edge >= nyq:
            raise ConfigurationError(
                f"Nyquist violation: tones around hops.centers_hz[{i}] = {c / 1e6:g} MHz reach "
                f"{edge / 1e6:g} MHz from sim center, Nyquist is {nyq / 1e6:g} MHz",
                path="two_tone.delta_f_hz",
            )
    if sc.two_tone.delta_f_hz >= nyq:
        raise ConfigurationError("Nyquist violation: beat frequency above Nyquist", path="two_tone.delta_f_hz")
    for section, make in (("two_tone", sc.two_tone_config), ("hops", sc.hop_schedule)):
        try:
            make()
        except ConfigurationError as e:
            raise ConfigurationError(e.message, path=f"{section}.{e.path}" if e.path else section) from None
    if not sc.followers:
        raise ConfigurationError("at least one follower required", path="followers")
    for i, f in enumerate(sc.followers):
        p = f"followers[{i}]"
        if f.ref_bpf.center_hz != sc.two_tone.delta_f_hz:
            raise ConfigurationError("must equal two_tone.delta_f_hz", path=f"{p}.ref_bpf.center_hz")
        try:
            f.ref_filter(sc.rate_hz)
        except ConfigurationError as e:
            raise ConfigurationError(e.message, path=f"{p}.ref_bpf") from None
        if f.front_enabled:
            try:
                f.front_filter(sc.rate_hz, sc.sim_center_hz)
            except ConfigurationError as e:
                raise ConfigurationError(e.message, path=f"{p}.front_bpf") from None
        a = f.agc
        if not (a.target_rms > 0 and a.rms_time_constant_s > 0 and a.loop_gain > 0):
            raise ConfigurationError("target_rms, loop_gain, rms_time_constant_s must be positive", path=f"{p}.agc")
        lo, hi = f.ref_bpf.center_hz - f.ref_bpf.bw_hz / 2, f.ref_bpf.center_hz + f.ref_bpf.bw_hz / 2
        if not lo <= sc.analysis.f_nominal_hz <= hi:
            raise ConfigurationError(f"outside {p} reference band", path="analysis.f_nominal_hz")
        if sc.analysis.window_s < 5 * (f.ref_bpf.num_taps - 1) / (2 * sc.rate_hz):
            raise ConfigurationError("must cover 5x the reference filter group delay", path="analysis.window_s")
    for i, intf in enumerate(sc.interferers):
        try:
            intf.check_band(sc.sim_center_hz, sc.rate_hz, 0.0, sc.duration_s)
        except ConfigurationError as e:
            raise ConfigurationError(e.message, path=f"interferers[{i}].freq_hz") from None
    an = sc.analysis
    if an.decim < 1:
        raise ConfigurationError("must be >= 1", path="analysis.decim")
    if not 0 < an.lp_bw_hz < sc.rate_hz / (2 * an.decim):
        raise ConfigurationError("must be below the decimated Nyquist rate", path="analysis.lp_bw_hz")
    try:
        design_lowpass(an.lp_bw_hz, an.lp_taps, sc.rate_hz)
    except ConfigurationError as e:
        raise ConfigurationError(e.message, path="analysis.lp_taps") from None
    if an.gate_multiplier < 0:
        raise ConfigurationError("must be >= 0", path="analysis.gate_multiplier")
    if not 0 < an.settle_band < 1:
        raise ConfigurationError("must be in (0, 1)", path="analysis.settle_band")
    out = sc.output
    if out.chunk_samples < 1:
        raise ConfigurationError("must be >= 1", path="output.chunk_samples")
    if out.spectrum_nfft < 16:
        raise ConfigurationError("must be >= 16", path="output.spectrum_nfft")
    if not math.isfinite(sc.sim_center_hz):
        raise ConfigurationError("must be finite", path="sim_center_hz")
