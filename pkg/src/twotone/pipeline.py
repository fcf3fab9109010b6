"""End-to-end orchestration: streaming run, parameter sweeps, result files."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .analysis import (
    ClockMetrics,
    PhaseDemodulator,
    PhaseSeries,
    default_gates,
    detect_dips,
    disturbed_fraction,
    finish_phase_series,
    fit_frequency,
    pairwise_differences,
    transient_metrics,
)
from .channel import Propagator
from .errors import AnalysisError, ConfigurationError, StageError
from .follower import ReceiverChainConfig, ReferenceExtractor
from .leader import TwoToneSource, generate_hop_sequence, hop_instants, pa_transfer
from .rng import substream
from .scenario import (
    AnalysisConfig,
    Scenario,
    canonical_json,
    scenario_digest,
    scenario_from_dict,
    scenario_to_dict,
    set_path,
    validate,
)

log = logging.getLogger(__name__)

WELCH_SEGMENTS = 8


def max_workers(requested: int | None = None) -> int:
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("TWOTONE_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


@dataclass
class FollowerResult:
    follower_id: int
    metrics: ClockMetrics
    phase: PhaseSeries
    clock_t: np.ndarray
    clock_x: np.ndarray
    spectrum_f: np.ndarray
    spectrum_db: np.ndarray
    agc_saturated: bool
    dip_threshold: float


@dataclass
class RunReport:
    scenario_digest: str
    metrics: list[ClockMetrics]
    pairwise_hz: list[list[float]]
    wall_time_s: float
    artifacts: dict[str, str] = field(default_factory=dict)
    hop_instants_s: list[float] = field(default_factory=list)
    followers: list[FollowerResult] = field(default_factory=list, repr=False)

    @property
    def max_pairwise_hz(self) -> float:
        return max((abs(v) for row in self.pairwise_hz for v in row), default=0.0)

    @property
    def disturbed_fraction(self) -> float:
        return float(np.mean([m.disturbed_fraction for m in self.metrics]))

    def metrics_dict(self) -> dict:
        return {
            "scenario_digest": self.scenario_digest,
            "followers": [m.to_dict() for m in self.metrics],
            "pairwise_hz": self.pairwise_hz,
            "max_pairwise_hz": self.max_pairwise_hz,
            "agc_saturated": [f.agc_saturated for f in self.followers],
            "hop_instants_s": self.hop_instants_s,
        }


class _FollowerStream:
    """Per-follower streaming state: receiver chain, demodulator, capture buffers."""

    def __init__(self, i: int, cfg: ReceiverChainConfig, sc: Scenario, capture_from: int, capture_n: int):
        self.i = i
        self.cfg = cfg
        an = sc.analysis
        self.extractor = ReferenceExtractor(cfg, sc.rate_hz, substream(sc.master_seed, f"follower/{i}/lna"),
                                            sc.sim_center_hz)
        self.demod = PhaseDemodulator(sc.rate_hz, an.f_nominal_hz, an.lp_bw_hz, an.decim, an.lp_taps,
                                      0.0, cfg.follower_ppm)
        self.t, self.ph, self.env = [], [], []
        self.capture_from, self.capture_n = capture_from, capture_n
        self.captured = []

    def step(self, pos: int, rx: np.ndarray):
        try:
            y = self.extractor.process(rx)
        except Exception as e:  # noqa: BLE001 - re-raised with context
            raise StageError("extract", self.i, e) from e
        lo = max(self.capture_from, pos)
        hi = min(self.capture_from + self.capture_n, pos + len(y))
        if hi > lo:
            self.captured.append(y[lo - pos:hi - pos])
        try:
            t, ph, env = self.demod.process(y)
        except Exception as e:  # noqa: BLE001
            raise StageError("demodulate", self.i, e) from e
        self.t.append(t)
        self.ph.append(ph)
        self.env.append(env)


def _welch_db(x: np.ndarray, rate_hz: float, nfft: int) -> tuple[np.ndarray, np.ndarray]:
    # 8 Hann segments at 50% overlap span 4.5 nfft samples
    need = (WELCH_SEGMENTS + 1) * nfft // 2
    if len(x) < need:
        nfft = max(16, 2 * len(x) // (WELCH_SEGMENTS + 1))
        need = (WELCH_SEGMENTS + 1) * nfft // 2
    f, p = sps.welch(x[:need], fs=rate_hz, window="hann", nperseg=nfft, noverlap=nfft // 2,
                     detrend=False, scaling="density")
    return f, 10.0 * np.log10(np.maximum(p, 1e-300))


def analyze_phase(ps: PhaseSeries, hops, an: AnalysisConfig, total_s: float, follower_id: int = 0):
    """Frequency fit, transients and dip detection for one phase series."""
    gates = default_gates(ps, hops, an.gate_multiplier)
    m = fit_frequency(ps, gates)
    events = transient_metrics(ps, hops, an.window_s, an.settle_band)
    thr = detect_dips(ps, events, hops, an.window_s, an.detect_floor) if events else an.detect_floor
    m.transient_events = events
    m.disturbed_fraction = disturbed_fraction(events, 0.0, total_s)
    m.follower_id = follower_id
    return m, thr


def simulate(sc: Scenario, workers: int | None = None, strip_hops: bool = False) -> tuple[list[FollowerResult], list[float]]:
    """Stream the scenario through every stage and analyze each follower.

    ``strip_hops`` withholds hop metadata from the returned results' gating
    (the receiver chain never sees it either way).
    """
    validate(sc)
    seed = sc.master_seed
    tt = sc.two_tone_config()
    schedule = sc.hop_schedule()
    try:
        hops = generate_hop_sequence(schedule, substream(seed, "hops"))
        source = TwoToneSource(tt, hops, sc.leader_oscillator, sc.rate_hz, substream(seed, "leader"), sc.duration_s)
    except ConfigurationError:
        raise
    except Exception as e:  # noqa: BLE001
        raise StageError("synthesize", None, e) from e
    instants = hop_instants(hops)
    n_f = len(sc.followers)
    prop = Propagator(sc.channel, n_f, substream(seed, "channel"), sc.rate_hz, tt.tone_amplitude)
    # received amplitude of one tone, the J/S reference
    rx_tone = tt.tone_amplitude * 10 ** (tt.pa_gain_db / 20.0) * sc.channel.amplitude_scale

    out = sc.output
    nfft = out.spectrum_nfft
    capture_n = max(out.clock_csv_samples, (WELCH_SEGMENTS + 1) * nfft // 2)
    streams = []
    for i, cfg in enumerate(sc.followers):
        # clock/spectrum capture starts once filters have filled and the AGC has acquired
        settle = cfg.settling_samples() + int(10 * cfg.agc.rms_time_constant_s * sc.rate_hz)
        streams.append(_FollowerStream(i, cfg, sc, settle, capture_n))

    chunk = out.chunk_samples
    nw = min(max_workers(workers), n_f)
    pool = ThreadPoolExecutor(nw) if nw > 1 else None
    try:
        pos = 0
        while not source.done:
            tx = source.next(chunk)
            tx = pa_transfer(tx, tt)
            if sc.interferers:
                t = (pos + np.arange(len(tx))) / sc.rate_hz
                jam = np.zeros(len(tx), dtype=np.complex128)
                for intf in sc.interferers:
                    if intf.power_rel_db != -math.inf:
                        jam += intf.waveform(t, sc.sim_center_hz, rx_tone)
            else:
                jam = None

            def work(st, pos=pos, tx=tx, jam=jam):
                try:
                    rx = prop.process_one(st.i, tx)
                except Exception as e:  # noqa: BLE001
                    raise StageError("propagate", st.i, e) from e
                if jam is not None:
                    rx = rx + jam
                st.step(pos, rx)

            if pool is None:
                for st in streams:
                    work(st)
            else:
                for f in [pool.submit(work, st) for st in streams]:
                    f.result()
            pos += len(tx)
    finally:
        if pool is not None:
            pool.shutdown()

    total = pos / sc.rate_hz
    an = sc.analysis
    gate_hops = [] if strip_hops else instants
    results = []
    for st in streams:
        cfg = st.cfg
        ps = finish_phase_series(
            np.concatenate(st.t), np.concatenate(st.ph), np.concatenate(st.env), sc.rate_hz, an.decim,
            an.f_nominal_hz, 0.0, cfg.settling_samples() + an.lp_taps - 1,
            cfg.ref_filter(sc.rate_hz).group_delay_s, cfg.follower_ppm, an.lp_taps,
        )
        try:
            m, thr = analyze_phase(ps, gate_hops, an, total, st.i)
        except AnalysisError as e:
            raise AnalysisError(f"follower {st.i}: {e}") from e
        x = np.concatenate(st.captured) if st.captured else np.zeros(0)
        ct = (st.capture_from + np.arange(len(x))) / sc.rate_hz * (1.0 + 1e-6 * cfg.follower_ppm)
        if len(x) >= 2 * 16:
            sf, sdb = _welch_db(x, sc.rate_hz, nfft)
        else:
            sf, sdb = np.zeros(0), np.zeros(0)
        agc_loop = st.extractor.agc
        # the loop overshoots into the clamp while acquiring; only later clamping is news
        startup = int(10 * cfg.agc.rms_time_constant_s * sc.rate_hz)
        if agc_loop.saturated_after(startup):
            log.warning("follower %d: AGC gain hit its %.0f dB limit after acquisition (envelope dips at hops)",
                        st.i, cfg.agc.max_gain_db)
        results.append(FollowerResult(st.i, m, ps, ct[:out.clock_csv_samples], x[:out.clock_csv_samples],
                                      sf, sdb, agc_loop.saturated_after(startup), thr))
    return results, instants


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v))


def write_outputs(report: RunReport, sc: Scenario, out_dir) -> dict[str, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arts = {}
    p = out / "metrics.json"
    p.write_text(json.dumps(report.metrics_dict(), sort_keys=True, indent=2) + "\n")
    arts["metrics"] = str(p)
    for fr in report.followers:
        i = fr.follower_id
        p = out / f"clock_{i}.csv"
        _write_csv(p, ["time_s", "value"], ((_fmt(a), _fmt(b)) for a, b in zip(fr.clock_t, fr.clock_x)))
        arts[f"clock_{i}"] = str(p)
        p = out / f"spectrum_{i}.csv"
        _write_csv(p, ["freq_hz", "psd_db_per_hz"], ((_fmt(a), _fmt(b)) for a, b in zip(fr.spectrum_f, fr.spectrum_db)))
        arts[f"spectrum_{i}"] = str(p)
        if sc.output.write_phase_csv:
            ps = fr.phase
            p = out / f"phase_{i}.csv"
            _write_csv(p, ["time_s", "phase_rad", "envelope"],
                       ((_fmt(a), _fmt(b), _fmt(c)) for a, b, c in zip(ps.times_s, ps.phase_rad, ps.envelope)))
            arts[f"phase_{i}"] = str(p)
    (out / "scenario.json").write_text(canonical_json(scenario_to_dict(sc)) + "\n")
    arts["scenario"] = str(out / "scenario.json")
    return arts


def run(sc: Scenario, out_dir=None, workers: int | None = None, strip_hops: bool = False) -> RunReport:
    t0 = time.perf_counter()
    results, instants = simulate(sc, workers, strip_hops)
    metrics = [r.metrics for r in results]
    pw = pairwise_differences(metrics).tolist() if len(metrics) > 1 else [[0.0]]
    report = RunReport(scenario_digest(sc), metrics, pw, 0.0, hop_instants_s=list(instants), followers=results)
    if out_dir is not None:
        report.artifacts = write_outputs(report, sc, out_dir)
    report.wall_time_s = time.perf_counter() - t0
    return report


def sweep(sc: Scenario, param_path: str, values, out_dir=None, workers: int | None = None) -> list[RunReport]:
    """One run per value; point k uses master_seed ^ k."""
    base = scenario_to_dict(sc)
    scenarios = []
    for k, v in enumerate(values):
        d = set_path(base, param_path, v)
        d["master_seed"] = int(sc.master_seed) ^ k
        scenarios.append(scenario_from_dict(d))
    reports = []
    for k, s in enumerate(scenarios):
        sub = None if out_dir is None else Path(out_dir) / f"point_{k}"
        reports.append(run(s, sub, workers))
    if out_dir is not None:
        n_f = len(sc.followers)
        rows = []
        for v, r in zip(values, reports):
            rows.append([v] + [_fmt(m.f_hat_hz) for m in r.metrics] + [_fmt(r.disturbed_fraction), _fmt(r.max_pairwise_hz)])
        header = [param_path] + [f"f_hat_hz_{i}" for i in range(n_f)] + ["disturbed_fraction", "max_pairwise_hz"]
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        _write_csv(Path(out_dir) / "sweep.csv", header, rows)
    return reports
