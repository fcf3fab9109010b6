"""Monte-Carlo spread of the OLS frequency estimate under white phase noise.

Compares the sample std of f_hat with sigma*sqrt(12/(N T^2))/(2 pi), and
shows the error shrinking roughly as T^-1.5 as the capture grows.
"""

import argparse

import numpy as np

from twotone.analysis import ols_line, ols_slope_std
from twotone.rng import Rng

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--rate", type=float, default=1e6)
    a = p.parse_args()
    rng = Rng(2024)
    print("T_s,mc_std_hz,closed_form_hz,ratio")
    for T in (0.005, 0.01, 0.02, 0.04):
        t = np.arange(int(T * a.rate)) / a.rate
        est = [ols_line(t, a.sigma * rng.normals(len(t)))[0] / (2 * np.pi) for _ in range(a.trials)]
        mc = float(np.std(est, ddof=1))
        cf = ols_slope_std(a.sigma, len(t), T)
        print(f"{T},{mc:.5g},{cf:.5g},{mc / cf:.3f}")
