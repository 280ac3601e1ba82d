"""Row/column sums and stationary law of the exact discrete kernel for small state spaces."""

import argparse

import numpy as np

from cfwealth.chain_dd import build_transition_matrix, enumerate_states, stationary_distribution
from cfwealth.stats import total_variation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--agents", type=int, default=3)
    ap.add_argument("--coins", type=int, default=4)
    args = ap.parse_args()
    mat = build_transition_matrix(args.agents, args.coins)
    pi = stationary_distribution(mat)
    size = mat.shape[0]
    print("state,row_sum,col_sum,stationary")
    for s, r, c, p in zip(enumerate_states(args.agents, args.coins), mat.sum(axis=1), mat.sum(axis=0), pi):
        print(f"\"{s.counts}\",{r:.15f},{c:.15f},{p:.15f}")
    print(f"# TV(stationary, uniform) = {total_variation(pi, np.full(size, 1 / size)):.6g}")


if __name__ == "__main__":
    main()
