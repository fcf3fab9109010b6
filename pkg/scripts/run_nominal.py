"""Three followers 3 m from a hopping leader at 20 dB SNR; prints f_hat and pairwise spread."""

import argparse
import sys
from pathlib import Path

from twotone.cli import main

HERE = Path(__file__).resolve().parent

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out/nominal")
    p.add_argument("--seed", type=int, default=None)
    a = p.parse_args()
    argv = ["run", "--scenario", str(HERE / "scenarios" / "nominal.json"), "--out", a.out]
    if a.seed is not None:
        argv += ["--seed", str(a.seed)]
    sys.exit(main(argv))
