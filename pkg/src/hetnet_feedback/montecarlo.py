"""Monte Carlo simulator for the typical user of a multi-tier PPP network.

Determinism: trials are produced in fixed-size blocks, each drawing from its
own Philox stream keyed by ``(seed, block index)``. Blocks are concatenated in
order, so results are identical for any worker count.

Far interference: each tier's interferers are drawn as a PPP out to
``outer_ratio`` times that tier's exclusion radius (in squared-distance units);
the remainder is added as its Campbell mean. With ``outer_ratio = 400`` and
beta = 4 the replaced tail carries 0.25 % of the mean interference.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .coop import CoopCondition
from .model import NetworkConfig, power_ratios

BLOCK = 4096
OUTER_RATIO = 400.0


@dataclass(frozen=True)
class SimulationEstimate:
    mean: float
    half_width_95: float
    trials: int
    seed: int

    @classmethod
    def from_samples(cls, samples, seed: int) -> "SimulationEstimate":
        x = np.asarray(samples, dtype=float)
        n = len(x)
        sd = float(np.std(x, ddof=1)) if n > 1 else float("inf")
        return cls(float(np.mean(x)), 1.96 * sd / math.sqrt(n), n, seed)

    def contains(self, value: float) -> bool:
        return abs(value - self.mean) <= self.half_width_95

    def proportion_interval(self, z: float = 1.96) -> tuple:
        """Wilson score interval, for estimates that are means of 0/1 indicators.

        Unlike the normal-approximation half-width it does not collapse to zero
        width when every trial lands on the same side of the threshold.
        """
        n, p = self.trials, self.mean
        centre = (p + z * z / (2 * n)) / (1 + z * z / n)
        half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
        return centre - half, centre + half

    def proportion_contains(self, value: float) -> bool:
        lo, hi = self.proportion_interval()
        return lo <= value <= hi


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def run_blocks(fn, trials: int, seed: int, max_workers: int = 1, block: int = BLOCK):
    """Call ``fn(rng, n)`` per block and concatenate the per-trial outputs in order.

    ``fn`` returns a dict of arrays with leading dimension ``n``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    sizes = [block] * (trials // block) + ([trials % block] if trials % block else [])
    jobs = [(block_rng(seed, b), n) for b, n in enumerate(sizes)]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            parts = list(pool.map(lambda j: fn(*j), jobs))
    else:
        parts = [fn(*j) for j in jobs]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


# ---------------------------------------------------------------------------
# Network realizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkRealization:
    points: tuple  # per-tier (n_i, 2) coordinate arrays
    radius: float

    @property
    def tiers(self) -> np.ndarray:
        return np.concatenate([np.full(len(p), i) for i, p in enumerate(self.points)])

    @property
    def coordinates(self) -> np.ndarray:
        return np.concatenate(self.points) if self.points else np.zeros((0, 2))


def default_radius(config: NetworkConfig) -> float:
    lam_eq = min(float(np.sum(config.densities * power_ratios(config, k)))
                 for k in range(config.num_tiers))
    return 20.0 / math.sqrt(lam_eq)


def sample_network(config: NetworkConfig, rng: np.random.Generator,
                   radius: Optional[float] = None) -> NetworkRealization:
    """Independent homogeneous PPPs on a disk centered at the typical user."""
    radius = default_radius(config) if radius is None else radius
    pts = []
    for t in config.tiers:
        n = rng.poisson(t.density * math.pi * radius ** 2) if t.density > 0 else 0
        r = radius * np.sqrt(rng.random(n))
        phi = rng.uniform(0.0, 2.0 * math.pi, n)
        pts.append(np.column_stack([r * np.cos(phi), r * np.sin(phi)]))
    return NetworkRealization(tuple(pts), radius)


def nearest_distances(config: NetworkConfig, count: int, trials: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Sorted distances to the ``count`` nearest points of every tier.

    Returns shape ``(trials, K, count)``; uses that ``pi*lambda*r_j^2`` of a
    PPP are the partial sums of unit exponentials.
    """
    lam = config.densities
    e = rng.standard_exponential((trials, config.num_tiers, count))
    return np.sqrt(np.cumsum(e, axis=-1) / (math.pi * lam[None, :, None]))


@dataclass(frozen=True)
class ClusterDraw:
    tiers: np.ndarray      # (trials, L) tier of each member, strongest first
    distances: np.ndarray  # (trials, L)
    deltas: np.ndarray     # (trials, L-1) received-power ratio to the home BS


def associate_and_cluster(config: NetworkConfig, L: int, trials: int,
                          rng: np.random.Generator) -> ClusterDraw:
    """Form each user's cluster from the L strongest biased received powers."""
    d = nearest_distances(config, L, trials, rng)
    return _cluster_from_distances(config, d, L)


def _cluster_from_distances(config: NetworkConfig, d: np.ndarray, L: int) -> ClusterDraw:
    beta = config.pathloss_exponent
    trials, K, m = d.shape
    tier = np.broadcast_to(np.arange(K)[None, :, None], d.shape).reshape(trials, -1)
    flat = d.reshape(trials, -1)
    ps = (config.powers * config.biases)[tier]
    score = ps * flat ** (-beta)
    order = np.argsort(-score, axis=1)[:, :L]
    tiers = np.take_along_axis(tier, order, axis=1)
    dist = np.take_along_axis(flat, order, axis=1)
    rx = config.powers[tiers] * dist ** (-beta)
    return ClusterDraw(tiers, dist, rx[:, 1:] / rx[:, :1])


def cluster_from_realization(real: NetworkRealization, config: NetworkConfig, L: int):
    """Members ``(tier, index)`` and deltas of one disk realization."""
    coords = real.coordinates
    if len(coords) < L:
        raise ValueError(f"realization has {len(coords)} points, fewer than L = {L}")
    tiers = real.tiers
    dist = np.hypot(coords[:, 0], coords[:, 1])
    score = (config.powers * config.biases)[tiers] * dist ** (-config.pathloss_exponent)
    order = np.argsort(-score)[:L]
    rx = config.powers[tiers[order]] * dist[order] ** (-config.pathloss_exponent)
    return tiers[order], dist[order], rx[1:] / rx[0]


# ---------------------------------------------------------------------------
# Channels, quantization and beamforming
# ---------------------------------------------------------------------------


def complex_gaussian(rng, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def sample_quantization_error(bits: float, antennas: int, rng, size=None):
    """``sin^2`` of the angle between a channel and its quantized direction."""
    if antennas < 2:
        raise ValueError("quantization needs at least two antennas")
    if math.isinf(bits):
        return np.zeros(size) if size is not None else 0.0
    u = rng.random(size)
    return (u * 2.0 ** (-bits)) ** (1.0 / (antennas - 1))


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _orthogonal_unit(direction, rng):
    """Uniform random unit vectors orthogonal to each row of ``direction``."""
    g = complex_gaussian(rng, direction.shape)
    g = g - direction * np.sum(direction.conj() * g, axis=-1, keepdims=True)
    return _unit(g)


def quantize_direction(h, bits: float, rng, return_error: bool = False):
    """Quantized channel direction with a quantization-cell error angle.

    ``h`` is ``(N,)`` or batched ``(T, N)``.
    """
    h = np.asarray(h, dtype=complex)
    single = h.ndim == 1
    hb = h[None] if single else h
    norms = np.linalg.norm(hb, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot quantize a zero channel")
    direction = hb / norms
    s2 = sample_quantization_error(bits, hb.shape[-1], rng, hb.shape[0])[:, None]
    out = np.sqrt(1.0 - s2) * direction + np.sqrt(s2) * _orthogonal_unit(direction, rng)
    out = out[0] if single else out
    if return_error:
        return out, (s2[0, 0] if single else s2[:, 0])
    return out


def _null_basis(constraints, rng):
    """Orthonormal basis of the complement of the constraint columns.

    ``constraints`` has shape ``(T, N, k)``; returns ``(T, N, N-k)``.
    """
    T, N, k = constraints.shape
    fill = complex_gaussian(rng, (T, N, N - k))
    q, _ = np.linalg.qr(np.concatenate([constraints, fill], axis=-1))
    return q[:, :, k:]


def zf_beamformer(constraints, rng):
    """Random unit vector orthogonal to every constraint vector.

    ``constraints``: ``(k, N)`` or batched ``(T, k, N)`` rows to null.
    """
    c = np.asarray(constraints, dtype=complex)
    single = c.ndim == 2
    cb = c[None] if single else c
    basis = _null_basis(np.swapaxes(cb, 1, 2), rng)
    w = _unit(complex_gaussian(rng, basis.shape[:1] + basis.shape[2:]))
    v = np.einsum("tnd,td->tn", basis, w)
    return v[0] if single else v


def cb_beamformer(desired, constraints, rng):
    """Unit vector closest to ``desired`` among those orthogonal to every constraint."""
    d = np.asarray(desired, dtype=complex)
    c = np.asarray(constraints, dtype=complex)
    single = d.ndim == 1
    db = d[None] if single else d
    cb = c[None] if single else c
    if cb.shape[1] == 0:
        v = _unit(db)
        return v[0] if single else v
    q, _ = np.linalg.qr(np.swapaxes(cb, 1, 2))
    proj = db - np.einsum("tnk,tk->tn", q, np.einsum("tnk,tn->tk", q.conj(), db))
    norm = np.linalg.norm(proj, axis=-1)
    bad = norm < 1e-12
    if np.any(bad):
        proj[bad] = zf_beamformer(cb[bad], rng)
        norm[bad] = 1.0
    v = proj / norm[:, None]
    return v[0] if single else v


def _inner_gain(h, v):
    return np.abs(np.sum(h.conj() * v, axis=-1)) ** 2


def zf_residual_gains(L: int, bits: float, trials: int, seed: int, antennas: Optional[int] = None,
                      max_workers: int = 1) -> np.ndarray:
    """``|h* v|^2`` for a cluster BS nulling the user's quantized channel plus L-2 others."""
    n = L if antennas is None else antennas

    def block(rng, t):
        h = complex_gaussian(rng, (t, n))
        hq = quantize_direction(h, bits, rng)
        others = _unit(complex_gaussian(rng, (t, L - 2, n)))
        own = _unit(complex_gaussian(rng, (t, n)))
        v = cb_beamformer(own, np.concatenate([hq[:, None, :], others], axis=1), rng)
        return {"g": _inner_gain(h, v)}

    return run_blocks(block, trials, seed, max_workers)["g"]


def mrt_desired_gains(antennas: int, bits: float, trials: int, seed: int,
                      max_workers: int = 1) -> np.ndarray:
    """``|h* h_hat|^2`` of MRT on the quantized direction."""
    def block(rng, t):
        h = complex_gaussian(rng, (t, antennas))
        return {"g": _inner_gain(h, quantize_direction(h, bits, rng))}

    return run_blocks(block, trials, seed, max_workers)["g"]


def laplace_estimate(samples, s: float, seed: int = 0) -> SimulationEstimate:
    return SimulationEstimate.from_samples(np.exp(-s * np.asarray(samples)), seed)


# ---------------------------------------------------------------------------
# Aggregate interference
# ---------------------------------------------------------------------------


def _ppp_shell(rng, mean_per_unit, scale, beta, outer_ratio, start=1.0):
    """Faded power of a PPP in squared-distance units ``u`` on ``(start, outer_ratio)``.

    Intensity per unit ``u`` is ``mean_per_unit[t]``; a point at ``u``
    contributes ``scale[t] * g * u^(-beta/2)``. The tail beyond
    ``outer_ratio`` is replaced by its mean.
    """
    counts = rng.poisson(mean_per_unit * (outer_ratio - start))
    owner = np.repeat(np.arange(len(counts)), counts)
    u = rng.uniform(start, outer_ratio, counts.sum())
    if start == 0.0:
        u = np.maximum(u, np.finfo(float).tiny)
    g = rng.standard_exponential(counts.sum())
    near = np.bincount(owner, weights=g * u ** (-beta / 2.0), minlength=len(counts))
    tail = mean_per_unit * 2.0 / (beta - 2.0) * outer_ratio ** (1.0 - beta / 2.0)
    return scale * (near + tail)


def _ccdf_estimates(sir, gammas, seed):
    return tuple(SimulationEstimate.from_samples((sir >= g).astype(float), seed) for g in gammas)


@dataclass(frozen=True)
class SimulationResult:
    thresholds: np.ndarray
    ccdf: tuple          # SimulationEstimate per threshold
    se: SimulationEstimate
    acceptance_rate: float = 1.0

    def ccdf_means(self) -> np.ndarray:
        return np.array([e.mean for e in self.ccdf])

    def ccdf_half_widths(self) -> np.ndarray:
        return np.array([e.half_width_95 for e in self.ccdf])


def estimate_noncoop(config: NetworkConfig, k: int, bits: float, trials: int, seed: int,
                     gammas: Sequence[float] = (1.0,), open_prob: float = 1.0,
                     outer_ratio: float = OUTER_RATIO, max_workers: int = 1,
                     return_samples: bool = False):
    """Simulate the SIR of a tier-``k`` user served by MRT on quantized CDI.

    Each proposal draws the nearest (accessible) BS of every tier; proposals
    not won by tier ``k`` are rejected. ``trials`` counts accepted users.
    """
    n_ant = int(config.tiers[k].antennas)
    if n_ant < 2:
        raise ValueError("the serving tier needs at least two antennas")
    if not 0 < open_prob <= 1:
        raise ValueError("open_prob must lie in (0, 1]")
    K = config.num_tiers
    beta = config.pathloss_exponent
    lam = config.densities.copy()
    closed_lam = (1.0 - open_prob) * lam[k]
    lam[k] *= open_prob
    ps = config.powers * config.biases
    lam_c = lam * power_ratios(config, k)
    accept = lam[k] / lam_c.sum()
    proposals = int(math.ceil(1.25 * BLOCK / accept)) + 64

    def block(rng, t):
        rs = []
        got = 0
        while got < t:
            e = rng.standard_exponential((proposals, K))
            r = np.sqrt(e / (math.pi * lam))
            r = r[np.argmax(ps * r ** (-beta), axis=1) == k]
            rs.append(r)
            got += len(r)
        r = np.concatenate(rs)[:t]
        serve = r[:, k]
        interference = np.zeros(t)
        for i in range(K):
            # normalized by the serving link P_k * serve^-beta
            scale = config.powers[i] * r[:, i] ** (-beta) / (config.powers[k] * serve ** (-beta))
            per_unit = lam[i] * math.pi * r[:, i] ** 2
            interference += _ppp_shell(rng, per_unit, scale, beta, outer_ratio)
            if i != k:
                interference += scale * rng.standard_exponential(t)
        if closed_lam > 0:
            per_unit = closed_lam * math.pi * serve ** 2
            interference += _ppp_shell(rng, per_unit, np.ones(t), beta, outer_ratio, start=0.0)
        s2 = sample_quantization_error(bits, n_ant, rng, t)
        desired = rng.gamma(n_ant, 1.0, t) * (1.0 - s2)
        return {"sir": desired / interference}

    sir = run_blocks(block, trials, seed, max_workers)["sir"]
    result = SimulationResult(np.asarray(gammas, dtype=float), _ccdf_estimates(sir, gammas, seed),
                              SimulationEstimate.from_samples(np.log2(1.0 + sir), seed), accept)
    return (result, sir) if return_samples else result


def estimate_coop_conditioned(cond: CoopCondition, trials: int, seed: int,
                              gammas: Sequence[float] = (1.0,), mode: str = "reduced",
                              outer_ratio: float = OUTER_RATIO, max_workers: int = 1,
                              return_samples: bool = False):
    """Simulate the SIR of a cluster user at fixed intra-cluster geometry.

    ``mode="reduced"`` gives every cluster BS exactly L antennas; ``"general"``
    uses each member tier's antenna count and coordinated beamforming, with the
    home BS steering toward the user's quantized channel (``cond.home_bits``).
    """
    config = cond.config
    L = cond.size
    k = cond.furthest_tier
    beta = config.pathloss_exponent
    deltas = np.asarray(cond.geometry.deltas)
    bits = cond.bits
    if mode == "reduced":
        ant = [L] * L
    elif mode == "general":
        ant = [int(a) for a in cond.member_antennas()]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if min(ant) < L:
        raise ValueError("every cluster BS needs at least L antennas")
    lam_c = config.densities * power_ratios(config, k)
    share = lam_c / lam_c.sum()
    bias_ratio = config.biases[k] / config.biases

    def block(rng, t):
        # pi * Lambda * R^2 of the furthest member
        v = rng.gamma(L, 1.0, t)
        out = np.zeros(t)
        for i in range(len(lam_c)):
            out += _ppp_shell(rng, share[i] * v, np.full(t, bias_ratio[i]), beta, outer_ratio)
        out *= deltas[-1]
        # home BS: serve the user, null L-1 other cluster users
        n0 = ant[0]
        h0 = complex_gaussian(rng, (t, n0))
        others = _unit(complex_gaussian(rng, (t, L - 1, n0)))
        target = quantize_direction(h0, cond.home_bits, rng)
        desired = _inner_gain(h0, cb_beamformer(target, others, rng))
        intra = np.zeros(t)
        for j in range(1, L):
            n = ant[j]
            h = complex_gaussian(rng, (t, n))
            hq = quantize_direction(h, bits[j - 1], rng)
            rest = _unit(complex_gaussian(rng, (t, L - 2, n)))
            own = _unit(complex_gaussian(rng, (t, n)))
            vj = cb_beamformer(own, np.concatenate([hq[:, None, :], rest], axis=1), rng)
            intra += deltas[j - 1] * _inner_gain(h, vj)
        return {"sir": desired / (intra + out)}

    sir = run_blocks(block, trials, seed, max_workers)["sir"]
    result = SimulationResult(np.asarray(gammas, dtype=float), _ccdf_estimates(sir, gammas, seed),
                              SimulationEstimate.from_samples(np.log2(1.0 + sir), seed))
    return (result, sir) if return_samples else result
