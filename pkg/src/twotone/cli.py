"""Command line: ``run``, ``sweep`` and ``analyze``.

Exit codes: 0 success, 2 validation error, 3 analysis error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .analysis import PhaseDemodulator, finish_phase_series
from .errors import AnalysisError, ConfigurationError, StageError
from .follower import ReceiverChainConfig, ReferenceExtractor
from .iqfile import read_iq
from .pipeline import RunReport, _welch_db, _write_csv, _fmt, analyze_phase, run, sweep
from .rng import substream
from .scenario import AnalysisConfig, _build, load_scenario, scenario_from_dict, scenario_to_dict

EXIT_OK, EXIT_VALIDATION, EXIT_ANALYSIS = 0, 2, 3

log = logging.getLogger("twotone")


def _parse_values(text: str) -> list:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            vals.append(json.loads(tok))
        except json.JSONDecodeError:
            vals.append(tok)
    if not vals:
        raise ConfigurationError("no values given", path="--values")
    return vals


def _summary(report: RunReport) -> str:
    lines = [f"scenario {report.scenario_digest[:16]}  wall {report.wall_time_s:.1f} s"]
    for m in report.metrics:
        lines.append(f"  follower {m.follower_id}: f_hat {m.f_hat_hz:.6f} Hz  "
                     f"residual {m.residual_rms_rad:.3g} rad  gated {m.gated_fraction:.3%}  "
                     f"disturbed {m.disturbed_fraction:.3%}")
    lines.append(f"  max pairwise |D| {report.max_pairwise_hz:.4g} Hz")
    return "\n".join(lines)


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        d = scenario_to_dict(sc)
        d["master_seed"] = args.seed
        sc = scenario_from_dict(d)
    report = run(sc, args.out, args.workers)
    print(_summary(report))
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    values = _parse_values(args.values)
    reports = sweep(sc, args.param, values, args.out, args.workers)
    for v, r in zip(values, reports):
        print(f"{args.param} = {v}")
        print(_summary(r))
    print(f"wrote {Path(args.out) / 'sweep.csv'}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    buf, head = read_iq(args.input, args.header)
    an = _build(AnalysisConfig, head.get("analysis", {}), "analysis")
    hops = [float(h) for h in head.get("hop_instants_s", [])]
    fid = int(head.get("follower_id", 0))
    ppm = float(head.get("follower_ppm", 0.0))
    settle = int(head.get("settling_samples", 0))
    gd = float(head.get("ref_group_delay_s", 0.0))
    x = buf.samples
    if buf.kind == "complex-baseband":
        # raw capture: run it through a receiver chain first
        cfg = _build(ReceiverChainConfig, head.get("receiver", {}), "receiver")
        ex = ReferenceExtractor(cfg, buf.rate_hz, substream(int(head.get("seed", 0)), f"follower/{fid}/lna"),
                                float(head["sim_center_hz"]))
        x = ex.process(x)
        settle += cfg.settling_samples()
        gd = cfg.ref_filter(buf.rate_hz).group_delay_s
        ppm = cfg.follower_ppm
    dem = PhaseDemodulator(buf.rate_hz, an.f_nominal_hz, an.lp_bw_hz, an.decim, an.lp_taps,
                           buf.start_time_s, ppm)
    t, ph, env = dem.process(x)
    ps = finish_phase_series(t, ph, env, buf.rate_hz, an.decim, an.f_nominal_hz, buf.start_time_s,
                             settle + an.lp_taps - 1, gd, ppm, an.lp_taps)
    m, _ = analyze_phase(ps, hops, an, len(x) / buf.rate_hz, fid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps({"followers": [m.to_dict()]}, sort_keys=True, indent=2) + "\n")
    f, db = _welch_db(np.asarray(x[settle:]), buf.rate_hz, 8192)
    _write_csv(out / f"spectrum_{fid}.csv", ["freq_hz", "psd_db_per_hz"], ((_fmt(a), _fmt(b)) for a, b in zip(f, db)))
    print(f"follower {fid}: f_hat {m.f_hat_hz:.6f} Hz  residual {m.residual_rms_rad:.3g} rad")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twotone", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int, default=None, help="override master_seed")
    r.add_argument("--workers", type=int, default=None)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="vary one scalar scenario field")
    s.add_argument("--scenario", required=True)
    s.add_argument("--param", required=True, help="dotted path, e.g. hops.dwell_s")
    s.add_argument("--values", required=True, help="comma separated, e.g. 0.02,0.01")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", help="re-analyze a recorded clock or capture")
    a.add_argument("--input", required=True, help="interleaved float32 I/Q file")
    a.add_argument("--header", required=True, help="JSON sidecar")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as e:
        if isinstance(e.cause, ConfigurationError):
            print(f"validation error: {e}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"analysis error: {e}", file=sys.stderr)
        return EXIT_ANALYSIS
    except AnalysisError as e:
        print(f"analysis error: {e}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
