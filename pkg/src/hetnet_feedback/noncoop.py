"""Non-cooperative (single serving BS, MRT with quantized CDI) performance.

Every quantity is conditioned on the typical user being served by tier ``k``.
Distances are in the length unit implied by the config's density unit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import NetworkConfig, power_ratios
from .special import (Jet, d_func, d_func_jet, digamma, gauss_legendre,
                      integrate_semi_infinite)

LOG2_E = 1.0 / math.log(2.0)
DEFAULT_NODES = 128


@dataclass(frozen=True)
class CcdfCurve:
    thresholds: np.ndarray
    values: np.ndarray

    def thresholds_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.thresholds)


def _antennas(config: NetworkConfig, k: int) -> int:
    n = int(config.tiers[k].antennas)
    if n < 2:
        raise ValueError(f"tier {k + 1} has a single antenna; the quantization model needs N >= 2")
    return n


def quantization_radius(bits: float, antennas: int) -> float:
    """Upper end ``2^(-B/(N-1))`` of the quantization-error support."""
    if bits < 0:
        raise ValueError("feedback bits must be nonnegative")
    if math.isinf(bits):
        return 0.0
    return 2.0 ** (-bits / (antennas - 1))


def _tier_terms(config: NetworkConfig, k: int):
    c = power_ratios(config, k)
    lam_c = config.densities * c
    bias_ratio = config.biases[k] / config.biases
    return lam_c, bias_ratio


def serving_distance_pdf(r, config: NetworkConfig, k: int):
    """Density of the distance to the serving tier-``k`` BS, given tier ``k`` serves."""
    lam_total = float(np.sum(_tier_terms(config, k)[0]))
    r = np.asarray(r, dtype=float)
    return 2.0 * math.pi * lam_total * r * np.exp(-math.pi * lam_total * r * r)


def association_probability(config: NetworkConfig, k: int) -> float:
    lam_c, _ = _tier_terms(config, k)
    return float(config.tiers[k].density / np.sum(lam_c))


def _quantization_nodes(delta: float, antennas: int, n: int):
    """Nodes and weights for integrating against the quantization-error density.

    The map ``x = delta * (1 - (1 - t)^2)`` flattens the square-root behaviour of
    the integrand near ``x = 1`` that appears when ``delta = 1`` (zero bits).
    """
    t, w = gauss_legendre(n, 0.0, 1.0)
    x = delta * (1.0 - (1.0 - t) ** 2)
    jac = 2.0 * delta * (1.0 - t)
    dens = (antennas - 1) * x ** (antennas - 2) / delta ** (antennas - 1)
    return x, w * jac * dens


def _interference_ratio(s, lam_c, bias_ratio, beta, extra=None):
    """``sum(lam_c) / sum(lam_c * (1 + D(s * bias_ratio)))`` for float or Jet ``s``."""
    if isinstance(s, Jet):
        den = Jet.constant(np.zeros(np.shape(s.coeffs[0])), s.order)
        for lc, br in zip(lam_c, bias_ratio):
            den = den + d_func_jet(s * br, beta) * lc + lc
        if extra is not None:
            den = den + extra
        return den.reciprocal() * float(np.sum(lam_c))
    den = 0.0
    for lc, br in zip(lam_c, bias_ratio):
        den = den + lc * (1.0 + d_func(s * br, beta))
    if extra is not None:
        den = den + extra
    return np.sum(lam_c) / den


def laplace_interference(s, config: NetworkConfig, k: int, bits: float,
                         nodes: int = DEFAULT_NODES):
    """Laplace transform of interference over the quantization-degraded desired gain.

    ``s`` may be a float (array of floats) or a :class:`Jet`, in which case the
    returned jet carries the Taylor coefficients in ``s``.
    """
    n_ant = _antennas(config, k)
    lam_c, bias_ratio = _tier_terms(config, k)
    beta = config.pathloss_exponent
    delta = quantization_radius(bits, n_ant)
    is_jet = isinstance(s, Jet)
    s0 = s.coeffs[0] if is_jet else np.asarray(s, dtype=float)
    if np.any(s0 < 0):
        raise ValueError("s must be nonnegative")
    if delta == 0.0:
        return _interference_ratio(s, lam_c, bias_ratio, beta)
    x, w = _quantization_nodes(delta, n_ant, nodes)
    if is_jet:
        inner = _interference_ratio(s * (1.0 / (1.0 - x)), lam_c, bias_ratio, beta)
        return Jet(np.tensordot(inner.coeffs, w, axes=([-1], [0])))
    s_arr = np.atleast_1d(s0)
    scaled = s_arr[:, None] / (1.0 - x)[None, :]
    vals = _interference_ratio(scaled, lam_c, bias_ratio, beta) @ w
    return float(vals[0]) if np.ndim(s0) == 0 else vals


def _ccdf_from_jet(gamma: float, lt: Jet) -> float:
    """Sum ``(-gamma)^m * t_m`` over the Taylor coefficients ``t_m`` of the transform."""
    powers = (-gamma) ** np.arange(lt.order + 1)
    return float(np.clip(np.dot(powers, lt.coeffs), 0.0, 1.0))


def sir_ccdf_noncoop(gamma: float, config: NetworkConfig, k: int, bits: float,
                     nodes: int = DEFAULT_NODES) -> float:
    """``P[SIR >= gamma]`` for a tier-``k`` user with ``bits`` of CDI feedback."""
    if not gamma > 0:
        if gamma == 0:
            return 1.0
        raise ValueError("gamma must be positive")
    n_ant = _antennas(config, k)
    lt = laplace_interference(Jet.variable(gamma, n_ant - 1), config, k, bits, nodes)
    return _ccdf_from_jet(gamma, lt)


def _closed_access_transform(s: Jet, config: NetworkConfig, k: int, bits: float,
                             open_prob: float, nodes: int) -> Jet:
    n_ant = _antennas(config, k)
    lam_c, bias_ratio = _tier_terms(config, k)
    lam_c = lam_c.copy()
    lam_c[k] *= open_prob
    beta = config.pathloss_exponent
    ring = (1.0 - open_prob) * config.tiers[k].density * (2.0 * math.pi / beta) / math.sin(2.0 * math.pi / beta)
    delta = quantization_radius(bits, n_ant)
    if delta == 0.0:
        extra = (s ** (2.0 / beta)) * ring if ring > 0 else None
        return _interference_ratio(s, lam_c, bias_ratio, beta, extra)
    x, w = _quantization_nodes(delta, n_ant, nodes)
    arg = s * (1.0 / (1.0 - x))
    extra = (arg ** (2.0 / beta)) * ring if ring > 0 else None
    inner = _interference_ratio(arg, lam_c, bias_ratio, beta, extra)
    return Jet(np.tensordot(inner.coeffs, w, axes=([-1], [0])))


def sir_ccdf_noncoop_closed_access(gamma: float, config: NetworkConfig, k: int, bits: float,
                                   open_prob: float, nodes: int = DEFAULT_NODES) -> float:
    """SIR CCDF when only a fraction ``open_prob`` of tier-``k`` BSs admit the user.

    Closed tier-``k`` BSs interfere from anywhere in the plane.
    """
    if not 0 < open_prob <= 1:
        raise ValueError("open_prob must lie in (0, 1]")
    if gamma == 0:
        return 1.0
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    n_ant = _antennas(config, k)
    lt = _closed_access_transform(Jet.variable(gamma, n_ant - 1), config, k, bits, open_prob, nodes)
    return _ccdf_from_jet(gamma, lt)


def sir_ccdf_curve(gammas, config: NetworkConfig, k: int, bits: float,
                   open_prob: float = 1.0, max_workers: int = 1) -> CcdfCurve:
    gammas = np.asarray(gammas, dtype=float)
    if open_prob == 1.0:
        fn = lambda g: sir_ccdf_noncoop(g, config, k, bits)  # noqa: E731
    else:
        fn = lambda g: sir_ccdf_noncoop_closed_access(g, config, k, bits, open_prob)  # noqa: E731
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            values = list(pool.map(fn, gammas))
    else:
        values = [fn(g) for g in gammas]
    return CcdfCurve(gammas, np.array(values))


def desired_gain_laplace(s, antennas: int, bits: float):
    """Laplace transform of the MRT desired gain ``|h* h_hat|^2`` under quantized CDI."""
    q = 1.0 - quantization_radius(bits, antennas)
    s = np.asarray(s, dtype=float)
    return 1.0 / (1.0 + s) * (1.0 + s * q) ** (-(antennas - 1))


def ergodic_se_noncoop(config: NetworkConfig, k: int, bits: float, tol: float = 1e-9) -> float:
    """``E[log2(1 + SIR)]`` for a tier-``k`` user, in bit/s/Hz."""
    n_ant = _antennas(config, k)
    lam_c, bias_ratio = _tier_terms(config, k)
    beta = config.pathloss_exponent

    def integrand(z):
        if z == 0.0:
            return 0.0
        signal = 1.0 - desired_gain_laplace(z, n_ant, bits)
        return signal / z * _interference_ratio(z, lam_c, bias_ratio, beta)

    return LOG2_E * integrate_semi_infinite(integrand, tol=tol).value


def mean_interference(config: NetworkConfig, k: int) -> float:
    """Mean of the normalized aggregate interference seen by a tier-``k`` user."""
    lam_c, bias_ratio = _tier_terms(config, k)
    beta = config.pathloss_exponent
    return float(2.0 * np.sum(lam_c * bias_ratio) / ((beta - 2.0) * np.sum(lam_c)))


def se_lower_bound(config: NetworkConfig, k: int, bits: float) -> float:
    """Jensen-type lower bound on the ergodic SE used by the tier partition."""
    n_ant = _antennas(config, k)
    gain = (1.0 - quantization_radius(bits, n_ant)) * math.exp(digamma(n_ant))
    return math.log2(1.0 + gain / mean_interference(config, k))


def area_se(config: NetworkConfig, allocation) -> float:
    """Density-weighted sum of per-tier ergodic SE (bit/s/Hz per unit area)."""
    bits = np.asarray(getattr(allocation, "bits", allocation), dtype=float)
    if bits.shape != (config.num_tiers,):
        raise ValueError("allocation must have one entry per tier")
    return float(sum(config.tiers[k].density * ergodic_se_noncoop(config, k, bits[k])
                     for k in range(config.num_tiers)))
