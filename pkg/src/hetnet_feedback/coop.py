"""Cooperative case: L-BS clusters with multi-cell ZF on quantized CDI.

Results are conditioned on a fixed intra-cluster geometry. ``deltas[j]`` is the
received power of the (j+2)-th strongest cluster BS relative to the home BS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ClusterGeometry, NetworkConfig, power_ratios, validate
from .special import d_func, integrate_semi_infinite

LOG2_E = 1.0 / math.log(2.0)
MIN_DELTA = 1e-12


@dataclass(frozen=True)
class CoopCondition:
    """Cluster geometry plus the feedback each non-home cluster BS receives.

    ``bits[j]`` goes to cluster member j+2. ``home_bits`` is only meaningful
    when the home BS has spare antennas (general-antenna mode).
    """

    config: NetworkConfig
    geometry: ClusterGeometry
    bits: tuple
    home_bits: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(float(b) for b in self.bits))
        if len(self.bits) != self.geometry.size - 1:
            raise ValueError(f"need {self.geometry.size - 1} bit entries, got {len(self.bits)}")
        if any(b < 0 for b in self.bits) or self.home_bits < 0:
            raise ValueError("feedback bits must be nonnegative")

    @property
    def size(self) -> int:
        return self.geometry.size

    @property
    def furthest_tier(self) -> int:
        return self.geometry.furthest_tier

    @property
    def home_tier(self) -> int:
        return self.geometry.home_tier

    def with_bits(self, bits, home_bits=None) -> "CoopCondition":
        return CoopCondition(self.config, self.geometry, tuple(bits),
                             self.home_bits if home_bits is None else home_bits)

    def member_antennas(self) -> np.ndarray:
        """Antenna counts of the cluster members, in cluster order."""
        return self.config.antennas[list(self.geometry.member_tiers)]

    def violations(self) -> list:
        return validate(self.config, self.geometry)


def lth_distance_pdf(r, config: NetworkConfig, k: int, L: int):
    """Density of the distance to the L-th cluster member when it belongs to tier ``k``.

    Distances of all tiers are mapped onto tier ``k``'s power and bias, so the
    L-th point of the merged process is Gamma(L)-distributed in ``pi*Lambda*r^2``.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    lam = float(np.sum(config.densities * power_ratios(config, k)))
    r = np.asarray(r, dtype=float)
    u = math.pi * lam * r * r
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * np.exp(L * np.log(u) - u - math.lgamma(L)) / r
    return np.where(r > 0, out, 0.0)


def intra_cluster_factor(s, deltas, bits, L: int):
    """Laplace transform of residual intra-cluster interference after ZF."""
    deltas = np.maximum(np.asarray(deltas, dtype=float), MIN_DELTA)
    bits = np.asarray(bits, dtype=float)
    resid = np.where(np.isinf(bits), 0.0, 2.0 ** (-np.where(np.isinf(bits), 0.0, bits) / (L - 1)))
    s = np.asarray(s, dtype=float)
    return np.prod(1.0 / (1.0 + s[..., None] * deltas * resid), axis=-1)


def out_of_cluster_factor(s: float, config: NetworkConfig, k: int, L: int, delta_last: float):
    """Laplace transform of out-of-cluster interference, normalized by the home link."""
    c = power_ratios(config, k)
    lam_c = config.densities * c
    bias_ratio = config.biases[k] / config.biases
    beta = config.pathloss_exponent
    arg = s * max(delta_last, MIN_DELTA)
    den = sum(lc * (1.0 + d_func(arg * br, beta)) for lc, br in zip(lam_c, bias_ratio))
    return (float(np.sum(lam_c)) / den) ** L


def sir_ccdf_coop(gamma: float, cond: CoopCondition) -> float:
    """Conditioned ``P[SIR >= gamma]`` in the reduced-antenna (N = L) regime."""
    if gamma == 0:
        return 1.0
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    L = cond.size
    intra = float(intra_cluster_factor(gamma, cond.geometry.deltas, cond.bits, L))
    out = out_of_cluster_factor(gamma, cond.config, cond.furthest_tier, L, cond.geometry.deltas[-1])
    return min(1.0, max(0.0, intra * out))


def ergodic_se_coop(cond: CoopCondition, tol: float = 1e-9) -> float:
    """Conditioned ``E[log2(1 + SIR)]`` with exp(1) desired gain, in bit/s/Hz."""
    L = cond.size
    deltas = cond.geometry.deltas
    k = cond.furthest_tier

    def integrand(z):
        intra = float(intra_cluster_factor(z, deltas, cond.bits, L))
        return intra * out_of_cluster_factor(z, cond.config, k, L, deltas[-1]) / (1.0 + z)

    return LOG2_E * integrate_semi_infinite(integrand, tol=tol).value
