"""Frequency error of one follower against per-tone SNR."""

import argparse
import logging

from twotone.pipeline import sweep
from twotone.scenario import scenario_from_dict

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--snrs", default="0,10,20,30")
    p.add_argument("--duration", type=float, default=0.1)
    a = p.parse_args()
    logging.disable(logging.WARNING)
    snrs = [float(v) for v in a.snrs.split(",")]
    sc = scenario_from_dict({"duration_s": a.duration, "hops": {"dwell_s": 0.02}, "followers": [{}]})
    print("snr_db,f_err_hz,residual_rms_rad")
    for s, r in zip(snrs, sweep(sc, "channel.target_snr_db", snrs)):
        m = r.metrics[0]
        print(f"{s:g},{m.f_hat_hz - 1e7:+.6f},{m.residual_rms_rad:.4g}")
