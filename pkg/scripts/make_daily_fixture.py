"""Regenerate the bundled daily-count fixture ``src/reinar/data/daily_cases.csv``.

The series is synthetic.  It has 404 daily counts covering 2020-03-18 to
2021-04-25, quiet (state 1) except for two outbreak windows,
2020-03-22..2020-04-09 and 2021-03-06..2021-04-09 (state 2).  Counts are
simulated from a two-state max-variant model on that fixed calendar;
parameters and seed were fixed once and are not tuned.
"""

import datetime as dt
from pathlib import Path

import numpy as np

from reinar.configs import reference_model
from reinar.io import write_series
from reinar.model import ModelParams
from reinar.sampling import simulate

START, END = dt.date(2020, 3, 18), dt.date(2021, 4, 25)
BURSTS = [(dt.date(2020, 3, 22), dt.date(2020, 4, 9)), (dt.date(2021, 3, 6), dt.date(2021, 4, 9))]
SEED = 20200318


def main():
    days = [START + dt.timedelta(k) for k in range((END - START).days + 1)]
    z = np.array([2 if any(a <= d <= b for a, b in BURSTS) else 1 for d in days])
    template, _ = reference_model("r2c1", "max")
    params = ModelParams("max", (0.4, 15.0), (0.02, 0.5), (2, 4), template.phi)
    sim = simulate(params, z, seed=SEED)
    out = Path(__file__).resolve().parents[1] / "src" / "reinar" / "data" / "daily_cases.csv"
    write_series(out, sim.x)
    print(f"wrote {out} ({len(days)} days, {int((z == 2).sum())} outbreak days)")


if __name__ == "__main__":
    main()
