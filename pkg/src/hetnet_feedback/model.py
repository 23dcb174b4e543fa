"""Network, cluster and feedback-budget types plus config-file ingestion.

Tier indices are 0-based in the Python API. Config files and the CLI use the
1-based tier numbers of the figure captions.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

import tomli_w

LAMBDA_REF = 1e-4 / math.pi  # BS per m^2, the density unit of the figure captions


class ConfigError(ValueError):
    """Raised when a configuration violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class TierParams:
    density: float
    tx_power: float
    bias: float = 1.0
    antennas: int = 1
    open_access_prob: float = 1.0


@dataclass(frozen=True)
class NetworkConfig:
    tiers: tuple
    pathloss_exponent: float
    density_unit: str = "lambda_ref"

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(self.tiers))

    @property
    def num_tiers(self) -> int:
        return len(self.tiers)

    @property
    def densities(self) -> np.ndarray:
        return np.array([t.density for t in self.tiers], dtype=float)

    @property
    def powers(self) -> np.ndarray:
        return np.array([t.tx_power for t in self.tiers], dtype=float)

    @property
    def biases(self) -> np.ndarray:
        return np.array([t.bias for t in self.tiers], dtype=float)

    @property
    def antennas(self) -> np.ndarray:
        return np.array([t.antennas for t in self.tiers], dtype=int)

    def densities_per_m2(self) -> np.ndarray:
        scale = LAMBDA_REF if self.density_unit == "lambda_ref" else 1.0
        return self.densities * scale

    def scaled(self, power_factor: float) -> "NetworkConfig":
        """Copy with every transmit power multiplied by ``power_factor``."""
        tiers = [TierParams(t.density, t.tx_power * power_factor, t.bias, t.antennas,
                            t.open_access_prob) for t in self.tiers]
        return NetworkConfig(tiers, self.pathloss_exponent, self.density_unit)


@dataclass(frozen=True)
class ClusterGeometry:
    """Fixed intra-cluster geometry: ``deltas[l-2]`` is delta_{1,l} for l = 2..L."""

    size: int
    deltas: tuple
    member_tiers: tuple

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "member_tiers", tuple(int(t) for t in self.member_tiers))

    @property
    def home_tier(self) -> int:
        return self.member_tiers[0]

    @property
    def furthest_tier(self) -> int:
        return self.member_tiers[-1]


@dataclass(frozen=True)
class FeedbackAllocation:
    """Bit budgets with the weights of their budget constraint.

    ``weighting`` is ``"density"`` (non-cooperative, sum_k lambda_k B_k) or
    ``"uniform"`` (cooperative, plain sum).
    """

    bits: tuple
    budget: float
    weights: tuple = field(default=None)
    weighting: str = "uniform"

    def __post_init__(self):
        bits = tuple(float(b) for b in self.bits)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "budget", float(self.budget))
        w = self.weights
        if w is None:
            w = (1.0,) * len(bits)
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=float)

    @property
    def used(self) -> float:
        return float(np.dot(self.weights, self.bits))

    def is_feasible(self, tol: float = 1e-9) -> bool:
        return all(b >= 0 for b in self.bits) and self.used <= self.budget + tol

    def is_integer(self) -> bool:
        return all(float(b).is_integer() for b in self.bits)

    def __len__(self):
        return len(self.bits)

    def __getitem__(self, i):
        return self.bits[i]


# ---------------------------------------------------------------------------
# Density rescaling
# ---------------------------------------------------------------------------


def _check_index(config: NetworkConfig, k: int):
    if not 0 <= k < config.num_tiers:
        raise IndexError(f"tier index {k} out of range for {config.num_tiers} tiers")


def power_ratios(config: NetworkConfig, k: int) -> np.ndarray:
    """``(P_i S_i / (P_k S_k))^(2/beta)`` for every tier i."""
    _check_index(config, k)
    ps = config.powers * config.biases
    return (ps / ps[k]) ** (2.0 / config.pathloss_exponent)


def rescaled_density(config: NetworkConfig, source_tier: int, reference_tier: int) -> float:
    """Density of ``source_tier`` after mapping it onto the reference tier's power and bias."""
    _check_index(config, source_tier)
    if source_tier == reference_tier:
        _check_index(config, reference_tier)
        return config.tiers[source_tier].density
    return float(config.tiers[source_tier].density * power_ratios(config, reference_tier)[source_tier])


def equivalent_total_density(config: NetworkConfig, reference_tier: int) -> float:
    return float(sum(rescaled_density(config, i, reference_tier) for i in range(config.num_tiers)))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(config: NetworkConfig, cluster: Optional[ClusterGeometry] = None,
             allocation: Optional[FeedbackAllocation] = None) -> list:
    """Return a list of human-readable invariant violations (empty if ok)."""
    v = []
    if not config.pathloss_exponent > 2:
        v.append("pathloss_exponent must exceed 2")
    if config.num_tiers < 1:
        v.append("at least one tier is required")
    if config.density_unit not in ("lambda_ref", "per_m2"):
        v.append(f"unknown density_unit {config.density_unit!r}")
    for i, t in enumerate(config.tiers, start=1):
        if not t.density > 0:
            v.append(f"tier {i}: density must be positive")
        if not t.tx_power > 0:
            v.append(f"tier {i}: tx_power must be positive")
        if not t.bias > 0:
            v.append(f"tier {i}: bias must be positive")
        if int(t.antennas) != t.antennas or t.antennas < 1:
            v.append(f"tier {i}: antennas must be a positive integer")
        if not 0 < t.open_access_prob <= 1:
            v.append(f"tier {i}: open_access_prob must lie in (0, 1]")
    if cluster is not None:
        L = cluster.size
        if L < 2:
            v.append("cluster size must be at least 2")
        if len(cluster.deltas) != L - 1:
            v.append(f"cluster needs {L - 1} deltas, got {len(cluster.deltas)}")
        if any(not (d > 0 and math.isfinite(d)) for d in cluster.deltas):
            v.append("every delta must lie in (0, inf)")
        if len(cluster.member_tiers) != L:
            v.append(f"cluster needs {L} member tiers, got {len(cluster.member_tiers)}")
        if any(not 0 <= t < config.num_tiers for t in cluster.member_tiers):
            v.append("member tier index out of range")
        if config.num_tiers and L > min(t.antennas for t in config.tiers):
            v.append(f"cluster size {L} exceeds min_k N_k = "
                     f"{min(t.antennas for t in config.tiers)} (multi-cell ZF needs L <= N)")
        if config.num_tiers and len(set(config.biases.tolist())) == 1:
            d = cluster.deltas
            if any(d[i] < d[i + 1] for i in range(len(d) - 1)):
                v.append("with equal biases the deltas must be nonincreasing")
    if allocation is not None:
        if any(b < 0 for b in allocation.bits):
            v.append("feedback bits must be nonnegative")
        if allocation.used > allocation.budget + 1e-9:
            v.append(f"feedback uses {allocation.used:g} > budget {allocation.budget:g}")
    return v


def check(config: NetworkConfig, cluster=None, allocation=None):
    violations = validate(config, cluster, allocation)
    if violations:
        raise ConfigError(violations)


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfigBundle:
    network: NetworkConfig
    cluster: Optional[ClusterGeometry] = None
    feedback: Optional[FeedbackAllocation] = None


def _network_from_table(net: dict) -> NetworkConfig:
    power_unit = net.get("power_unit", "W")
    bias_unit = net.get("bias_unit", "linear")
    if power_unit not in ("W", "dBm"):
        raise ConfigError([f"unknown power_unit {power_unit!r}"])
    if bias_unit not in ("linear", "dB"):
        raise ConfigError([f"unknown bias_unit {bias_unit!r}"])
    tiers = []
    for t in net.get("tiers", []):
        p = t["tx_power"]
        s = t.get("bias", 0.0 if bias_unit == "dB" else 1.0)
        tiers.append(TierParams(
            density=float(t["density"]),
            tx_power=float(dbm_to_watts(p)) if power_unit == "dBm" else float(p),
            bias=float(db_to_linear(s)) if bias_unit == "dB" else float(s),
            antennas=int(t.get("antennas", 1)),
            open_access_prob=float(t.get("open_access_prob", 1.0)),
        ))
    return NetworkConfig(tiers, float(net["pathloss_exponent"]),
                         net.get("density_unit", "lambda_ref"))


def parse_config(data: dict) -> ConfigBundle:
    if "network" not in data:
        raise ConfigError(["missing [network] section"])
    network = _network_from_table(data["network"])
    cluster = None
    if "cluster" in data:
        c = data["cluster"]
        members = [int(m) - 1 for m in c.get("member_tiers", [])]
        cluster = ClusterGeometry(int(c["size"]), c.get("deltas", []), members)
    feedback = None
    if "feedback" in data:
        f = data["feedback"]
        weighting = f.get("weighting", "uniform")
        bits = f.get("bits", [])
        weights = None
        if weighting == "density":
            weights = tuple(network.densities) if len(bits) == network.num_tiers else None
        feedback = FeedbackAllocation(bits, float(f.get("budget", 0.0)), weights, weighting)
    return ConfigBundle(network, cluster, feedback)


def load_config(path) -> ConfigBundle:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"{path}: {exc}"]) from exc
    return parse_config(data)


def bundle_to_dict(bundle: ConfigBundle) -> dict:
    net = bundle.network
    out = {"network": {
        "pathloss_exponent": net.pathloss_exponent,
        "density_unit": net.density_unit,
        "power_unit": "W",
        "bias_unit": "linear",
        "tiers": [{"density": t.density, "tx_power": t.tx_power, "bias": t.bias,
                   "antennas": int(t.antennas), "open_access_prob": t.open_access_prob}
                  for t in net.tiers],
    }}
    if bundle.cluster is not None:
        c = bundle.cluster
        out["cluster"] = {"size": c.size, "deltas": list(c.deltas),
                          "member_tiers": [m + 1 for m in c.member_tiers]}
    if bundle.feedback is not None:
        f = bundle.feedback
        out["feedback"] = {"bits": list(f.bits), "budget": f.budget, "weighting": f.weighting}
    return out


def dumps_config(bundle: ConfigBundle) -> str:
    return tomli_w.dumps(bundle_to_dict(bundle))


def save_config(bundle: ConfigBundle, path) -> None:
    Path(path).write_text(dumps_config(bundle))


def make_network(densities: Sequence[float], powers_dbm: Sequence[float],
                 biases_db: Sequence[float], antennas: Sequence[int],
                 pathloss_exponent: float = 4.0) -> NetworkConfig:
    """Build a config from caption-style values (lambda_ref, dBm, dB)."""
    tiers = [TierParams(float(d), float(dbm_to_watts(p)), float(db_to_linear(s)), int(n))
             for d, p, s, n in zip(densities, powers_dbm, biases_db, antennas)]
    return NetworkConfig(tiers, pathloss_exponent, "lambda_ref")
