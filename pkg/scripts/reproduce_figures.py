"""Regenerate the figure sweeps as CSV files.

    python3 scripts/reproduce_figures.py --out results/ [--figures fig1 fig2 fig4] [--fig3-trials 20000]
"""

import argparse
import time
from pathlib import Path

from hetnet_feedback.cli import ExperimentSpec, run


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--figures", nargs="+", default=["fig1", "fig2", "fig4"],
                    choices=["fig1", "fig2", "fig3", "fig4"])
    ap.add_argument("--fig3-trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fig in args.figures:
        t0 = time.perf_counter()
        spec = ExperimentSpec("reproduce", figure=fig, out=str(out / f"{fig}.csv"), seed=args.seed,
                              trials=args.fig3_trials if fig == "fig3" else None, workers=args.workers)
        status = run(spec)
        print(f"{fig}: exit {status}, {time.perf_counter() - t0:.1f}s -> {spec.out}")


if __name__ == "__main__":
    main()
