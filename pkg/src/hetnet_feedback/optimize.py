"""Feedback partitioning across tiers and across cooperating base stations."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .model import FeedbackAllocation, NetworkConfig
from .noncoop import mean_interference
from .special import digamma, harmonic

LN2 = math.log(2.0)
REL_TOL = 1e-10
MAX_BISECTIONS = 400


@dataclass(frozen=True)
class WaterfillResult:
    allocation: FeedbackAllocation
    multiplier: float
    active_set: tuple
    iterations: int


# ---------------------------------------------------------------------------
# Tier partition (non-cooperative)
# ---------------------------------------------------------------------------


def _tier_constants(config: NetworkConfig):
    n = config.antennas.astype(float)
    if np.any(n < 2):
        raise ValueError("every tier needs at least two antennas")
    gain = np.exp([digamma(x) for x in n])
    interference = np.array([mean_interference(config, k) for k in range(config.num_tiers)])
    return n, gain, interference


def _tier_bits(level: float, n, gain, interference) -> np.ndarray:
    ratio = gain * (n - 1.0 + level) / ((n - 1.0) * (gain + interference))
    return np.maximum(0.0, (n - 1.0) * np.log2(ratio))


def partition_noncoop(config: NetworkConfig, budget: float) -> WaterfillResult:
    """Water-filling over tiers maximizing the density-weighted SE lower bound.

    The budget is per unit area: ``sum_k density_k * bits_k = budget``. The
    water level ``t`` is the reciprocal of the common marginal gain per bit.
    """
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    n, gain, interference = _tier_constants(config)
    lam = config.densities
    # below its own threshold level a tier receives nothing
    thresholds = (n - 1.0) * interference / gain
    if budget == 0:
        bits = np.zeros_like(lam)
        return WaterfillResult(FeedbackAllocation(bits, 0.0, tuple(lam), "density"),
                               float(thresholds.min()), (), 0)

    def used(level):
        return float(np.dot(lam, _tier_bits(level, n, gain, interference)))

    lo = float(thresholds.min())
    hi = max(2.0 * lo, 1.0)
    iterations = 0
    while used(hi) < budget:
        lo, hi = hi, 2.0 * hi
        iterations += 1
    while hi - lo > REL_TOL * hi and iterations < MAX_BISECTIONS:
        mid = 0.5 * (lo + hi)
        if used(mid) < budget:
            lo = mid
        else:
            hi = mid
        iterations += 1
    level = 0.5 * (lo + hi)
    bits = _tier_bits(level, n, gain, interference)
    # remove the residual bisection error so the budget binds exactly
    bits *= budget / np.dot(lam, bits)
    active = tuple(int(i) for i in np.flatnonzero(bits > 0))
    return WaterfillResult(FeedbackAllocation(bits, budget, tuple(lam), "density"),
                           level, active, iterations)


def equal_partition_noncoop(config: NetworkConfig, budget: float) -> FeedbackAllocation:
    """Baseline giving every tier the same share of the per-area budget."""
    lam = config.densities
    bits = budget / config.num_tiers / lam
    return FeedbackAllocation(bits, budget, tuple(lam), "density")


def lower_bound_marginals(config: NetworkConfig, bits) -> np.ndarray:
    """Derivative of each tier's SE lower bound per bit, divided by ln 2 scaling.

    At the water-filling optimum these are equal (to ``1/level``) on active tiers.
    """
    n, gain, interference = _tier_constants(config)
    a = 2.0 ** (-np.asarray(bits, dtype=float) / (n - 1.0))
    return a * gain / ((n - 1.0) * (interference + (1.0 - a) * gain))


# ---------------------------------------------------------------------------
# Cluster partition (cooperative, reduced antennas)
# ---------------------------------------------------------------------------


def _log_linear_split(log_weights: np.ndarray, budget: float, spread: float, clamp: bool):
    """Allocate ``budget/n + spread*(w - mean_active(w))`` with active-set clamping."""
    active = np.ones(len(log_weights), dtype=bool)
    while True:
        bits = np.zeros(len(log_weights))
        w = log_weights[active]
        bits[active] = budget / active.sum() + spread * (w - w.mean())
        if not clamp or np.all(bits >= 0):
            return bits
        active &= bits > 0


def partition_coop(deltas: Sequence[float], L: int, budget: float,
                   clamp: bool = True) -> FeedbackAllocation:
    """Closed-form cluster partition from the log-linearized intra-cluster product.

    Entries that would go negative are dropped and the rest re-solved; pass
    ``clamp=False`` for the raw closed form.
    """
    deltas = np.asarray(deltas, dtype=float)
    if L < 2 or len(deltas) != L - 1:
        raise ValueError("need L >= 2 and L-1 deltas")
    if np.any(deltas <= 0):
        raise ValueError("deltas must be positive")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    bits = _log_linear_split(np.log2(deltas), budget, L - 1.0, clamp)
    return FeedbackAllocation(bits, budget)


def equal_partition_coop(L: int, budget: float) -> FeedbackAllocation:
    return FeedbackAllocation([budget / (L - 1)] * (L - 1), budget)


def intra_cluster_product(gamma: float, deltas, bits, L: int) -> float:
    """Product of per-BS ZF residual terms that the cluster partition maximizes."""
    d = np.asarray(deltas, dtype=float)
    b = np.asarray(bits, dtype=float)
    return float(np.prod(1.0 / (1.0 + gamma * d * 2.0 ** (-b / (L - 1)))))


# ---------------------------------------------------------------------------
# General-antenna cluster partition
# ---------------------------------------------------------------------------


def _general_bits(mu, gd, n):
    inner = LN2 / (mu * (n - 1.0)) - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        b = (n - 1.0) * (np.log2(gd) + np.log2(inner))
    return np.where(inner > 0, np.maximum(b, 0.0), 0.0)


def partition_coop_general(deltas: Sequence[float], antennas: Sequence[int], budget: float,
                           gamma: float, home_bits: float = 0.0) -> FeedbackAllocation:
    """Split ``budget - home_bits`` over non-home cluster BSs with their own antenna counts.

    Maximizes the intra-cluster product at threshold ``gamma`` exactly (no
    log-linearization), so the split depends on ``gamma`` when antennas differ.
    """
    deltas = np.asarray(deltas, dtype=float)
    n = np.asarray(antennas, dtype=float)
    if deltas.shape != n.shape:
        raise ValueError("deltas and antennas must have equal length")
    if np.any(n < 2):
        raise ValueError("every cluster BS needs at least two antennas")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    rest = budget - home_bits
    if rest < -1e-12 or home_bits < 0:
        raise ValueError(f"home_bits must lie in [0, {budget}]")
    rest = max(rest, 0.0)
    if rest == 0:
        return FeedbackAllocation(np.zeros(len(deltas)), rest)
    gd = gamma * deltas
    # at mu_max every entry is zero; the bit sum decreases in mu
    hi = float(np.max(LN2 * gd / ((n - 1.0) * (1.0 + gd))))
    lo = hi / 2.0
    while _general_bits(lo, gd, n).sum() < rest:
        hi, lo = lo, lo / 2.0
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= REL_TOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if _general_bits(mid, gd, n).sum() > rest:
            lo = mid
        else:
            hi = mid
    bits = _general_bits(0.5 * (lo + hi), gd, n)
    bits *= rest / bits.sum()
    return FeedbackAllocation(bits, rest)


DEFAULT_GAMMA_GRID_DB = tuple(np.arange(-5.0, 20.0 + 1e-9, 2.5))


@dataclass(frozen=True)
class LineSearchResult:
    home_bits: int
    allocation: FeedbackAllocation
    se: float
    gamma: float
    table: tuple = field(default=(), repr=False)  # (home_bits, gamma, bits, se) rows


def line_search_general(deltas: Sequence[float], antennas: Sequence[int], budget: int,
                        evaluator: Callable[[int, tuple], float],
                        gamma_grid: Optional[Sequence[float]] = None,
                        max_workers: int = 1) -> LineSearchResult:
    """Sweep the home BS's bits, split the rest per threshold, keep the best.

    ``antennas`` lists the non-home members. ``evaluator(home_bits, bits)``
    returns the ergodic SE of an integer allocation. Identical candidate
    allocations reached from different thresholds are evaluated once.
    """
    budget = int(budget)
    gammas = [10.0 ** (g / 10.0) for g in (gamma_grid if gamma_grid is not None
                                            else DEFAULT_GAMMA_GRID_DB)]
    if budget == 0:
        empty = FeedbackAllocation(np.zeros(len(deltas)), 0.0)
        return LineSearchResult(0, empty, evaluator(0, tuple(empty.bits)), gammas[0],
                                ((0, gammas[0], tuple(empty.bits), None),))
    candidates = {}
    origin = []
    for home in range(budget + 1):
        for g in gammas:
            real = partition_coop_general(deltas, antennas, budget, g, home)
            bits = tuple(integer_round(real, budget - home).bits)
            key = (home, bits)
            candidates.setdefault(key, g)
            origin.append((home, g, bits))
    keys = list(candidates)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            values = list(pool.map(lambda kb: evaluator(*kb), keys))
    else:
        values = [evaluator(*kb) for kb in keys]
    scores = dict(zip(keys, values))
    best = max(keys, key=lambda kb: (scores[kb], -kb[0]))
    table = tuple((h, g, b, scores[(h, b)]) for h, g, b in origin)
    return LineSearchResult(best[0], FeedbackAllocation(best[1], budget - best[0]),
                            scores[best], candidates[best], table)


# ---------------------------------------------------------------------------
# Single-tier expected partition and effective cluster size
# ---------------------------------------------------------------------------


def expected_log_deltas(L: int, beta: float) -> np.ndarray:
    """``E[log2 delta_l]`` for l = 2..L in a single-tier network."""
    return np.array([-beta * harmonic(l - 1) / (2.0 * LN2) for l in range(2, L + 1)])


def single_tier_expected_bits(L: int, beta: float, budget: float) -> np.ndarray:
    """Unclamped single-tier partition; trailing entries may be negative."""
    if L < 2:
        raise ValueError("L must be at least 2")
    if not beta > 2:
        raise ValueError("beta must exceed 2")
    return _log_linear_split(expected_log_deltas(L, beta), budget, L - 1.0, clamp=False)


def partition_single_tier_expected(L: int, beta: float, budget: float,
                                   clamp: bool = True) -> FeedbackAllocation:
    """Cluster partition driven by expected rather than realized geometry."""
    if L < 2:
        raise ValueError("L must be at least 2")
    if not beta > 2:
        raise ValueError("beta must exceed 2")
    bits = _log_linear_split(expected_log_deltas(L, beta), budget, L - 1.0, clamp)
    return FeedbackAllocation(bits, budget)


@dataclass(frozen=True)
class ClusterSizeEstimate:
    lower_bound: float
    asymptotic: float
    exact: int


def effective_cluster_size(budget: float, beta: float, max_size: int = 10_000) -> ClusterSizeEstimate:
    """Cluster size at which the expected partition first hands out at most one bit.

    ``exact`` scans cluster sizes; ``lower_bound`` uses ``H_l >= gamma_E + ln l``.
    """
    if not budget > 0:
        raise ValueError("budget must be positive")
    if not beta > 2:
        raise ValueError("beta must exceed 2")
    lower = LN2 / beta * math.sqrt(2.0 * beta * budget / LN2 + 1.0) - LN2 / beta + 1.0
    asym = math.sqrt(budget / beta)
    exact = None
    for L in range(2, max_size + 1):
        if single_tier_expected_bits(L, beta, budget)[-1] <= 1.0:
            exact = L
            break
    if exact is None:
        raise ArithmeticError(f"no cluster size up to {max_size} reaches one bit")
    return ClusterSizeEstimate(lower, asym, exact)


# ---------------------------------------------------------------------------
# Integer post-processing
# ---------------------------------------------------------------------------


def integer_round(allocation, budget: Optional[float] = None, weights=None,
                  evaluator: Optional[Callable[[np.ndarray], float]] = None,
                  strategy: Optional[str] = None) -> FeedbackAllocation:
    """Turn a real allocation into a feasible integer one.

    Strategy ``"round"`` rounds to nearest, then takes bits back until the
    weighted budget holds: from the entry losing least under ``evaluator`` or,
    without one, from the entry that was rounded up most. Strategy ``"greedy"``
    floors, then adds single bits where ``evaluator`` gains most.
    """
    if isinstance(allocation, FeedbackAllocation):
        bits = allocation.as_array()
        budget = allocation.budget if budget is None else budget
        weights = allocation.weights if weights is None else weights
        weighting = allocation.weighting
    else:
        bits = np.asarray(allocation, dtype=float)
        weighting = "uniform" if weights is None else "density"
    if budget is None:
        raise ValueError("budget is required for a plain array allocation")
    w = np.ones_like(bits) if weights is None else np.asarray(weights, dtype=float)
    if strategy is None:
        strategy = "greedy" if evaluator is not None else "round"
    tol = 1e-9 * max(1.0, abs(budget))

    if strategy == "round":
        out = np.round(bits)
        while np.dot(w, out) > budget + tol:
            cand = np.flatnonzero(out > 0)
            if evaluator is not None:
                base = evaluator(out)
                losses = []
                for i in cand:
                    trial = out.copy()
                    trial[i] -= 1
                    losses.append(base - evaluator(trial))
                i = cand[int(np.argmin(losses))]
            else:
                i = cand[int(np.argmax(out[cand] - bits[cand]))]
            out[i] -= 1
    elif strategy == "greedy":
        if evaluator is None:
            raise ValueError("the greedy strategy needs an evaluator")
        out = np.floor(bits)
        while True:
            room = budget - np.dot(w, out)
            cand = np.flatnonzero(w <= room + tol)
            if len(cand) == 0:
                break
            base = evaluator(out)
            gains = []
            for i in cand:
                trial = out.copy()
                trial[i] += 1
                gains.append(evaluator(trial) - base)
            j = int(np.argmax(gains))
            if gains[j] <= 0:
                break
            out[cand[j]] += 1
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return FeedbackAllocation(out, budget, None if weights is None else tuple(w), weighting)

