"""Generate the bundled synthetic 10-asset monthly returns file.

The file mimics the layout of a ten-industry monthly returns table: a
``YYYYMM`` date column followed by ten columns of returns in percent.
Returns follow a one-factor Gaussian model

    R_t = mu + beta * F_t + e_t,   F_t ~ N(0, s_f^2),  e_t ~ N(0, diag(s_e^2)),

with the parameters below (monthly, in percent), so the population moments
are known exactly:

    E[R] = mu,   Cov[R] = s_f^2 * beta beta' + diag(s_e^2).

Usage::

    python scripts/make_synthetic_returns.py [output.csv]
"""

import sys
from pathlib import Path

import numpy as np

SEED = 19680401
ASSETS = ["NoDur", "Durbl", "Manuf", "Enrgy", "HiTec", "Telcm", "Shops", "Hlth", "Utils", "Other"]
MU = np.array([1.0, 0.9, 0.95, 1.05, 1.1, 0.8, 0.95, 1.05, 0.75, 0.9])
BETA = np.array([0.8, 1.3, 1.1, 0.9, 1.3, 0.7, 1.0, 0.9, 0.6, 1.1])
FACTOR_SD = 4.0
IDIO_SD = np.array([2.0, 4.0, 2.0, 4.5, 3.5, 3.0, 2.5, 3.0, 2.5, 2.0])
START_YEAR, END_YEAR = 1960, 1999

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "drocal" / "data" / "synthetic_10_assets.csv"


def population_moments():
    cov = FACTOR_SD**2 * np.outer(BETA, BETA) + np.diag(IDIO_SD**2)
    return MU.copy(), cov


def generate(rng):
    dates = [f"{y}{m:02d}" for y in range(START_YEAR, END_YEAR + 1) for m in range(1, 13)]
    t = len(dates)
    factor = rng.normal(0.0, FACTOR_SD, size=t)
    idio = rng.normal(0.0, 1.0, size=(t, MU.size)) * IDIO_SD
    returns = MU + factor[:, None] * BETA + idio
    return dates, np.round(returns, 2)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    out = Path(argv[0]) if argv else DEFAULT_OUT
    dates, returns = generate(np.random.default_rng(SEED))
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("Date," + ",".join(ASSETS) + "\n")
        for d, row in zip(dates, returns):
            fh.write(d + "," + ",".join(f"{v:.2f}" for v in row) + "\n")
    print(f"wrote {len(dates)} rows to {out}")


if __name__ == "__main__":
    main()
