"""Compare closed-form CCDFs with Monte Carlo bands for the fig1a and fig2a settings."""

import argparse
import time

import numpy as np

from hetnet_feedback import coop, figures, montecarlo, noncoop

GAMMAS_DB = np.array([-10.0, -5.0, 0.0, 5.0, 10.0])


def report(label, analytic, sim):
    for g, a, est in zip(GAMMAS_DB, analytic, sim.ccdf):
        lo, hi = est.proportion_interval()
        flag = "ok" if lo <= a <= hi else "OUTSIDE"
        print(f"{label:>14} {g:6.1f} dB  analytic {a:.5f}  sim {est.mean:.5f} [{lo:.5f}, {hi:.5f}]  {flag}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()
    gammas = 10 ** (GAMMAS_DB / 10)

    cfg = figures.fig1_config("a")
    bits = 10.0
    for k in range(cfg.num_tiers):
        t0 = time.perf_counter()
        sim = montecarlo.estimate_noncoop(cfg, k, bits, args.trials, args.seed, gammas,
                                          max_workers=args.workers)
        analytic = [noncoop.sir_ccdf_noncoop(g, cfg, k, bits) for g in gammas]
        report(f"tier {k + 1}", analytic, sim)
        print(f"   acceptance {sim.acceptance_rate:.4f}, {time.perf_counter() - t0:.1f}s")

    bundle = figures.fig2_bundle("a")
    cond = coop.CoopCondition(bundle.network, bundle.cluster, (4.0, 4.0, 4.0))
    sim = montecarlo.estimate_coop_conditioned(cond, args.trials, args.seed, gammas,
                                               max_workers=args.workers)
    report("cluster L=4", [coop.sir_ccdf_coop(g, cond) for g in gammas], sim)
    print(f"   SE closed form {coop.ergodic_se_coop(cond):.4f}, "
          f"sim {sim.se.mean:.4f} +/- {sim.se.half_width_95:.4f}")


if __name__ == "__main__":
    main()
