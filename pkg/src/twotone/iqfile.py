"""Interleaved float32 little-endian I/Q recordings with a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .signal import COMPLEX_BASEBAND, REAL, SampleBuffer

_DTYPE = np.dtype("<f4")


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".json")


def write_iq(path, buf: SampleBuffer, header_path=None, extra: dict | None = None) -> Path:
    """Write samples as I0 Q0 I1 Q1 ...; real buffers get Q = 0.

    The sidecar records rate_hz, sim_center_hz, start_time_s and kind so a
    reader can tell a real clock from a complex-baseband capture.
    """
    x = buf.samples
    iq = np.empty(2 * len(x), dtype=_DTYPE)
    iq[0::2] = x.real
    iq[1::2] = x.imag if np.iscomplexobj(x) else 0.0
    Path(path).write_bytes(iq.tobytes())
    head = {"rate_hz": buf.rate_hz, "sim_center_hz": 0.0, "start_time_s": buf.start_time_s, "kind": buf.kind}
    if extra:
        head.update(extra)
    hp = Path(header_path) if header_path else sidecar_path(path)
    hp.write_text(json.dumps(head, sort_keys=True, indent=2) + "\n")
    return hp


def read_header(header_path) -> dict:
    try:
        head = json.loads(Path(header_path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"invalid JSON: {e}", path=str(header_path)) from None
    if not isinstance(head, dict):
        raise ConfigurationError("header must be a JSON object", path=str(header_path))
    if "rate_hz" not in head:
        raise ConfigurationError("missing required key", path="rate_hz")
    kind = head.get("kind", COMPLEX_BASEBAND)
    if kind not in (REAL, COMPLEX_BASEBAND):
        raise ConfigurationError(f"kind must be {REAL!r} or {COMPLEX_BASEBAND!r}", path="kind")
    head["kind"] = kind
    head.setdefault("sim_center_hz", 0.0)
    head.setdefault("start_time_s", 0.0)
    return head


def read_iq(path, header_path=None) -> tuple[SampleBuffer, dict]:
    head = read_header(header_path if header_path else sidecar_path(path))
    raw = np.fromfile(path, dtype=_DTYPE)
    if raw.size % 2:
        raise ConfigurationError("odd number of float32 values; not interleaved I/Q", path=str(path))
    i, q = raw[0::2].astype(np.float64), raw[1::2].astype(np.float64)
    samples = i if head["kind"] == REAL else i + 1j * q
    return SampleBuffer(samples, float(head["rate_hz"]), float(head["start_time_s"])), head
