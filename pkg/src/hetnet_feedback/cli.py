"""Command-line entry point: analytic evaluation, partitioning, simulation, figure sweeps."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import coop, figures, montecarlo, noncoop, optimize
from .model import ConfigBundle, ConfigError, load_config, validate
from .special import ConvergenceError

COMMANDS = ("noncoop-se", "coop-se", "optimize-noncoop", "optimize-coop", "optimize-general",
            "simulate", "reproduce")
DEFAULT_GAMMAS_DB = (-10.0, -5.0, 0.0, 5.0, 10.0)


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    config: Optional[str] = None
    budget: Optional[float] = None
    gammas_db: tuple = DEFAULT_GAMMAS_DB
    trials: Optional[int] = None
    seed: int = 0
    out: Optional[str] = None
    as_json: bool = False
    figure: Optional[str] = None
    workers: int = 1
    deltas: Optional[tuple] = None

    def violations(self) -> list:
        v = []
        if self.command not in COMMANDS:
            v.append(f"unknown command {self.command!r}")
        needs_config = self.command != "reproduce"
        if self.command == "optimize-coop" and self.deltas:
            needs_config = False
        if needs_config and not self.config:
            v.append(f"{self.command} requires --config")
        if self.deltas is not None and any(d <= 0 for d in self.deltas):
            v.append("--deltas must be positive")
        if self.command in ("optimize-noncoop", "optimize-coop", "optimize-general") and self.budget is None:
            v.append(f"{self.command} requires --btotal")
        if self.budget is not None and self.budget < 0:
            v.append("--btotal must be nonnegative")
        if self.command in ("simulate", "optimize-general") and (self.trials is None or self.trials < 1):
            v.append("trials must be at least 1")
        if self.command == "reproduce" and self.figure not in ("fig1", "fig2", "fig3", "fig4"):
            v.append("reproduce needs one of fig1, fig2, fig3, fig4")
        return v


class Table:
    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        self.rows = []

    def add(self, row: dict):
        self.rows.append([row.get(c, "") for c in self.columns])

    @classmethod
    def from_dicts(cls, rows: Sequence[dict]) -> "Table":
        cols = []
        for r in rows:
            cols += [c for c in r if c not in cols]
        t = cls(cols)
        for r in rows:
            t.add(r)
        return t


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def render(table: Table, as_json: bool) -> str:
    if as_json:
        rows = [[(float(x) if isinstance(x, (float, np.floating)) else
                  int(x) if isinstance(x, np.integer) else x) for x in r] for r in table.rows]
        return json.dumps({"columns": table.columns, "rows": rows}, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _load(spec: ExperimentSpec) -> ConfigBundle:
    try:
        bundle = load_config(spec.config)
    except OSError as exc:
        raise ConfigError([f"cannot read config {spec.config}: {exc.strerror}"]) from exc
    v = validate(bundle.network, bundle.cluster, bundle.feedback)
    if v:
        raise ConfigError(v)
    return bundle


def _tier_bits(bundle: ConfigBundle) -> np.ndarray:
    K = bundle.network.num_tiers
    if bundle.feedback is None or len(bundle.feedback.bits) != K:
        raise ConfigError([f"[feedback] bits must list one entry per tier ({K})"])
    return bundle.feedback.as_array()


def _cluster_condition(bundle: ConfigBundle, bits=None) -> coop.CoopCondition:
    if bundle.cluster is None:
        raise ConfigError(["this command needs a [cluster] section"])
    L = bundle.cluster.size
    if bits is None:
        if bundle.feedback is None or len(bundle.feedback.bits) != L - 1:
            raise ConfigError([f"[feedback] bits must list {L - 1} entries (cluster members 2..L)"])
        bits = bundle.feedback.bits
    return coop.CoopCondition(bundle.network, bundle.cluster, tuple(bits))


def cmd_noncoop_se(spec, bundle) -> Table:
    cfg = bundle.network
    bits = _tier_bits(bundle)
    gammas = 10.0 ** (np.asarray(spec.gammas_db) / 10.0)
    rows = []
    for k in range(cfg.num_tiers):
        se = noncoop.ergodic_se_noncoop(cfg, k, bits[k])
        bound = noncoop.se_lower_bound(cfg, k, bits[k])
        sim = None
        if spec.trials:
            sim = montecarlo.estimate_noncoop(cfg, k, bits[k], spec.trials, spec.seed, gammas,
                                              max_workers=spec.workers)
        for i, (g_db, g) in enumerate(zip(spec.gammas_db, gammas)):
            row = {"gamma_db": g_db, "tier": k + 1, "bits": bits[k],
                   "ccdf": noncoop.sir_ccdf_noncoop(g, cfg, k, bits[k]),
                   "ergodic_se": se, "se_lower_bound": bound}
            if sim is not None:
                row.update({"sim_ccdf_mean": sim.ccdf[i].mean,
                            "sim_ccdf_half_width": sim.ccdf[i].half_width_95,
                            "sim_se_mean": sim.se.mean, "sim_se_half_width": sim.se.half_width_95})
            rows.append(row)
    return Table.from_dicts(rows)


def cmd_coop_se(spec, bundle) -> Table:
    cond = _cluster_condition(bundle)
    se = coop.ergodic_se_coop(cond)
    gammas = 10.0 ** (np.asarray(spec.gammas_db) / 10.0)
    sim = None
    if spec.trials:
        sim = montecarlo.estimate_coop_conditioned(cond, spec.trials, spec.seed, gammas,
                                                   max_workers=spec.workers)
    rows = []
    for i, (g_db, g) in enumerate(zip(spec.gammas_db, gammas)):
        row = {"gamma_db": g_db, "ccdf": coop.sir_ccdf_coop(g, cond), "ergodic_se": se}
        if sim is not None:
            row.update({"sim_ccdf_mean": sim.ccdf[i].mean, "sim_ccdf_half_width": sim.ccdf[i].half_width_95,
                        "sim_se_mean": sim.se.mean, "sim_se_half_width": sim.se.half_width_95})
        rows.append(row)
    return Table.from_dicts(rows)


def cmd_optimize_noncoop(spec, bundle) -> Table:
    cfg = bundle.network
    res = optimize.partition_noncoop(cfg, spec.budget)
    lam = cfg.densities

    def lower_bound_sum(bits):
        return sum(lam[k] * noncoop.se_lower_bound(cfg, k, bits[k]) for k in range(cfg.num_tiers))

    integer = optimize.integer_round(res.allocation, evaluator=lower_bound_sum)
    equal = optimize.equal_partition_noncoop(cfg, spec.budget)
    rows = []
    for k in range(cfg.num_tiers):
        rows.append({"tier": k + 1, "density": lam[k],
                     "mean_interference": noncoop.mean_interference(cfg, k),
                     "bits_real": res.allocation.bits[k], "bits_integer": integer.bits[k],
                     "bits_equal": equal.bits[k]})
    return Table.from_dicts(rows)


def cmd_optimize_coop(spec, bundle) -> Table:
    if spec.deltas:
        deltas = tuple(spec.deltas)
        geo = None
    elif bundle is not None and bundle.cluster is not None:
        geo = bundle.cluster
        deltas = geo.deltas
    else:
        raise ConfigError(["optimize-coop needs --deltas or a config with a [cluster] section"])
    L = len(deltas) + 1
    real = optimize.partition_coop(deltas, L, spec.budget)
    integer = optimize.integer_round(real)
    equal = optimize.equal_partition_coop(L, spec.budget)
    cols = ["kind"] + [f"B{l}" for l in range(2, L + 1)]
    table = Table(cols + (["ergodic_se"] if geo is not None else []))
    for kind, alloc in (("real", real), ("integer", integer), ("equal", equal)):
        row = {"kind": kind, **{f"B{l}": b for l, b in zip(range(2, L + 1), alloc.bits)}}
        if geo is not None:
            row["ergodic_se"] = coop.ergodic_se_coop(coop.CoopCondition(bundle.network, geo, alloc.bits))
        table.add(row)
    return table


def cmd_optimize_general(spec, bundle) -> Table:
    cond = _cluster_condition(bundle, (0.0,) * (bundle.cluster.size - 1) if bundle.cluster else None)
    ant = cond.member_antennas()

    def evaluator(home, bits):
        c = cond.with_bits(bits, home)
        return montecarlo.estimate_coop_conditioned(c, spec.trials, spec.seed, mode="general").se.mean

    res = optimize.line_search_general(cond.geometry.deltas, ant[1:], int(spec.budget), evaluator,
                                       spec.gammas_db if spec.gammas_db != DEFAULT_GAMMAS_DB else None,
                                       spec.workers)
    L = cond.size
    best = (res.home_bits, tuple(res.allocation.bits))
    rows = []
    for home, g, bits, se in res.table:
        rows.append({"home_bits": home, "gamma_db": 10 * np.log10(g),
                     **{f"B{l}": b for l, b in zip(range(2, L + 1), bits)},
                     "sim_se": se, "best": int((home, tuple(bits)) == best)})
    return Table.from_dicts(rows)


def cmd_simulate(spec, bundle) -> Table:
    gammas = 10.0 ** (np.asarray(spec.gammas_db) / 10.0)
    rows = []
    if bundle.cluster is not None:
        cond = _cluster_condition(bundle)
        sim = montecarlo.estimate_coop_conditioned(cond, spec.trials, spec.seed, gammas,
                                                   max_workers=spec.workers)
        for g_db, g, e in zip(spec.gammas_db, gammas, sim.ccdf):
            rows.append({"gamma_db": g_db, "ccdf_analytic": coop.sir_ccdf_coop(g, cond),
                         "sim_mean": e.mean, "sim_half_width": e.half_width_95})
        return Table.from_dicts(rows)
    cfg = bundle.network
    bits = _tier_bits(bundle)
    for k in range(cfg.num_tiers):
        sim = montecarlo.estimate_noncoop(cfg, k, bits[k], spec.trials, spec.seed, gammas,
                                          max_workers=spec.workers)
        for g_db, g, e in zip(spec.gammas_db, gammas, sim.ccdf):
            rows.append({"gamma_db": g_db, "tier": k + 1,
                         "ccdf_analytic": noncoop.sir_ccdf_noncoop(g, cfg, k, bits[k]),
                         "sim_mean": e.mean, "sim_half_width": e.half_width_95,
                         "acceptance_rate": sim.acceptance_rate})
    return Table.from_dicts(rows)


def cmd_reproduce(spec, bundle) -> Table:
    sweep = figures.BUDGET_SWEEP if spec.budget is None else (spec.budget,)
    if spec.figure == "fig1":
        rows = figures.fig1_rows("a", sweep) + figures.fig1_rows("b", sweep)
    elif spec.figure == "fig2":
        rows = figures.fig2_rows("a", sweep) + figures.fig2_rows("b", sweep)
    elif spec.figure == "fig4":
        rows = figures.fig4_rows("a", sweep) + figures.fig4_rows("b", sweep)
    else:
        kw = {"seed": spec.seed, "max_workers": spec.workers}
        if spec.trials:
            kw["trials"] = spec.trials
        if spec.budget is not None:
            kw["budget"] = int(spec.budget)
        rows = figures.fig3_rows("a", **kw) + figures.fig3_rows("b", **kw)
    return Table.from_dicts(rows)


HANDLERS = {
    "noncoop-se": cmd_noncoop_se,
    "coop-se": cmd_coop_se,
    "optimize-noncoop": cmd_optimize_noncoop,
    "optimize-coop": cmd_optimize_coop,
    "optimize-general": cmd_optimize_general,
    "simulate": cmd_simulate,
    "reproduce": cmd_reproduce,
}


def run(spec: ExperimentSpec, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        v = spec.violations()
        if v:
            raise ConfigError(v)
        bundle = _load(spec) if spec.config else None
        table = HANDLERS[spec.command](spec, bundle)
    except ConfigError as exc:
        for msg in exc.violations:
            print(f"error: {msg}", file=stderr)
        return 1
    except (ConvergenceError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return 2
    text = render(table, spec.as_json)
    if spec.out:
        with open(spec.out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def _float_list(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hetnet-feedback", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("figure", nargs="?", help="fig1 | fig2 | fig3 | fig4 (reproduce only)")
    p.add_argument("--config", help="TOML network/cluster/feedback description")
    p.add_argument("--btotal", type=float, help="total feedback budget")
    p.add_argument("--gamma-db", type=_float_list, default=DEFAULT_GAMMAS_DB,
                   help="SIR thresholds in dB, comma or space separated")
    p.add_argument("--trials", type=int, help="Monte Carlo trials")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1, help="threads for simulation blocks")
    p.add_argument("--out", help="write to this file instead of stdout")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    p.add_argument("--deltas", type=_float_list,
                   help="intra-cluster power ratios of members 2..L (optimize-coop without a config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExperimentSpec(args.command, args.config, args.btotal, tuple(args.gamma_db), args.trials,
                          args.seed, args.out, args.json, args.figure, args.workers, args.deltas)
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
