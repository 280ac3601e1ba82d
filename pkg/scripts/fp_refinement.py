"""Per-step change of the projected stationary profile under grid refinement."""

import argparse

from cfwealth.fokker_planck import FpConfig, projected_step_change


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--mean", type=float, default=1.0)
    ap.add_argument("--w-max", type=float, default=50.0)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--max-cells", type=int, default=16384)
    args = ap.parse_args()
    print("cells,h,max_change,ratio")
    prev = None
    cells = 64
    while cells <= args.max_cells:
        cfg = FpConfig(args.gamma, args.mean, args.w_max, cells, args.dt)
        change = projected_step_change(cfg)
        ratio = "" if prev is None else f"{prev / change:.3f}"
        print(f"{cells},{cfg.h:.5g},{change:.6e},{ratio}")
        prev = change
        cells *= 2


if __name__ == "__main__":
    main()
