"""Fitted variance decay rate of the noiseless exchange model against (1-lam)^2 + lam^2 - 1."""

import argparse

import numpy as np

from cfwealth.kinetic import ExchangeParams, WealthPopulation, dsmc_run, fit_variance_rate, moment_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--agents", type=int, default=10_000)
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lams", default="0.05,0.1,0.25,0.4,0.5")
    args = ap.parse_args()
    print("lambda,fitted_rate,predicted_rate,relative_error")
    for k, lam in enumerate(float(v) for v in args.lams.split(",")):
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(k,)))
        pop = WealthPopulation.exponential(args.agents, rng)
        _, series = dsmc_run(pop, args.t_end, ExchangeParams(lam), rng, record_dt=0.1)
        rate = fit_variance_rate(series, 1.0, min(5.0, args.t_end))
        pred = moment_rate(2, lam)
        print(f"{lam},{rate:.5f},{pred:.5f},{abs(rate / pred - 1):.4f}")


if __name__ == "__main__":
    main()
