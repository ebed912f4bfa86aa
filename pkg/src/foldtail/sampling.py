"""Random control parameter and the seeded Monte Carlo loss engine.

Uniform variates come from a Philox counter-based stream keyed by the
seed: the variate at index ``i`` depends only on ``(seed, i)``, so a batch
can be split across any number of workers and reassembled bit-for-bit.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import NoThresholdMass, OutOfRange
from .jumpmap import BranchSpec, LossMap, losses

DEFAULT_CHUNK = 1 << 16
_PHILOX_LANES = 4


class Family(str, enum.Enum):
    UNIFORM = "Uniform"
    TRUNCATED_NORMAL = "TruncatedNormal"
    EXPONENTIAL = "Exponential"
    PARETO = "Pareto"


_PARAMS = {
    Family.UNIFORM: ("lo", "hi"),
    Family.TRUNCATED_NORMAL: ("mu", "sigma", "lo", "hi"),
    Family.EXPONENTIAL: ("rate", "shift"),
    Family.PARETO: ("scale", "tail_index", "shift"),
}


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


@dataclass(frozen=True)
class AlphaDistribution:
    family: Family
    parameters: tuple[float, ...]

    def __post_init__(self):
        fam = Family(self.family)
        params = tuple(float(v) for v in self.parameters)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "parameters", params)
        names = _PARAMS[fam]
        if len(params) != len(names):
            raise ValueError(f"{fam.value} takes parameters {names}, got {params}")
        if not all(math.isfinite(v) for v in params):
            raise ValueError(f"parameters must be finite, got {params}")
        p = dict(zip(names, params))
        if fam in (Family.UNIFORM, Family.TRUNCATED_NORMAL) and not p["lo"] < p["hi"]:
            raise ValueError("need lo < hi")
        if fam is Family.TRUNCATED_NORMAL:
            if not p["sigma"] > 0:
                raise ValueError("sigma must be positive")
            z_lo, z_hi = self._tn_mass()
            if not z_hi > z_lo:
                raise ValueError("truncation interval carries no normal mass")
        if fam is Family.EXPONENTIAL and not p["rate"] > 0:
            raise ValueError("rate must be positive")
        if fam is Family.PARETO and not (p["scale"] > 0 and p["tail_index"] > 0):
            raise ValueError("scale and tail_index must be positive")

    @classmethod
    def uniform(cls, lo, hi):
        return cls(Family.UNIFORM, (lo, hi))

    @classmethod
    def truncated_normal(cls, mu, sigma, lo, hi):
        return cls(Family.TRUNCATED_NORMAL, (mu, sigma, lo, hi))

    @classmethod
    def exponential(cls, rate, shift=0.0):
        return cls(Family.EXPONENTIAL, (rate, shift))

    @classmethod
    def pareto(cls, scale, tail_index, shift=0.0):
        return cls(Family.PARETO, (scale, tail_index, shift))

    def __getattr__(self, name):
        # named parameter access, e.g. dist.tail_index
        fam = self.__dict__.get("family")
        if fam is not None and name in _PARAMS[fam]:
            return self.parameters[_PARAMS[fam].index(name)]
        raise AttributeError(name)

    @property
    def support(self) -> tuple[float, float]:
        f, p = self.family, self.parameters
        if f is Family.UNIFORM:
            return p[0], p[1]
        if f is Family.TRUNCATED_NORMAL:
            return p[2], p[3]
        if f is Family.EXPONENTIAL:
            return p[1], math.inf
        return p[2] + p[0], math.inf

    def _tn_mass(self):
        mu, sigma, lo, hi = self.parameters
        return special.ndtr((lo - mu) / sigma), special.ndtr((hi - mu) / sigma)

    def cdf(self, a):
        x = np.asarray(a, dtype=np.float64)
        f, p = self.family, self.parameters
        if f is Family.UNIFORM:
            lo, hi = p
            out = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        elif f is Family.TRUNCATED_NORMAL:
            mu, sigma, lo, hi = p
            c_lo, c_hi = self._tn_mass()
            out = (special.ndtr((np.clip(x, lo, hi) - mu) / sigma) - c_lo) / (c_hi - c_lo)
            out = np.clip(out, 0.0, 1.0)
        elif f is Family.EXPONENTIAL:
            rate, shift = p
            out = -np.expm1(-rate * np.maximum(x - shift, 0.0))
        else:
            scale, index, shift = p
            with np.errstate(divide="ignore", invalid="ignore"):
                tail = (scale / (x - shift)) ** index
            out = np.where(x - shift >= scale, 1.0 - tail, 0.0)
        return _scalar_or_array(out, a)

    def quantile(self, q):
        u = np.asarray(q, dtype=np.float64)
        if np.any(~((u > 0.0) & (u < 1.0))):
            raise OutOfRange("quantile level must lie strictly between 0 and 1")
        f, p = self.family, self.parameters
        if f is Family.UNIFORM:
            lo, hi = p
            out = lo + u * (hi - lo)
        elif f is Family.TRUNCATED_NORMAL:
            mu, sigma, lo, hi = p
            c_lo, c_hi = self._tn_mass()
            out = np.clip(mu + sigma * special.ndtri(c_lo + u * (c_hi - c_lo)), lo, hi)
        elif f is Family.EXPONENTIAL:
            rate, shift = p
            out = shift - np.log1p(-u) / rate
        else:
            scale, index, shift = p
            out = shift + scale * (1.0 - u) ** (-1.0 / index)
        return _scalar_or_array(out, q)

    def density(self, a):
        x = np.asarray(a, dtype=np.float64)
        f, p = self.family, self.parameters
        if f is Family.UNIFORM:
            lo, hi = p
            out = np.where((x >= lo) & (x <= hi), 1.0 / (hi - lo), 0.0)
        elif f is Family.TRUNCATED_NORMAL:
            mu, sigma, lo, hi = p
            c_lo, c_hi = self._tn_mass()
            z = (x - mu) / sigma
            pdf = np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi) * (c_hi - c_lo))
            out = np.where((x >= lo) & (x <= hi), pdf, 0.0)
        elif f is Family.EXPONENTIAL:
            rate, shift = p
            out = np.where(x >= shift, rate * np.exp(-rate * np.maximum(x - shift, 0.0)), 0.0)
        else:
            scale, index, shift = p
            r = np.maximum(x - shift, scale)
            out = np.where(x - shift >= scale, index * scale ** index / r ** (index + 1.0), 0.0)
        return _scalar_or_array(out, a)

    def exceedance_probability(self, threshold):
        return _scalar_or_array(1.0 - np.asarray(self.cdf(threshold)), threshold)

    def has_threshold_mass(self, alpha_c: float) -> bool:
        return self.exceedance_probability(alpha_c) > 0.0


def cdf(dist: AlphaDistribution, a):
    return dist.cdf(a)


def quantile(dist: AlphaDistribution, q):
    return dist.quantile(q)


def exceedance_probability(dist: AlphaDistribution, threshold):
    return dist.exceedance_probability(threshold)


def uniform_stream(seed: int, start: int, stop: int) -> np.ndarray:
    """Open-interval uniforms for indices ``start..stop-1`` of the stream keyed by ``seed``."""
    seed = _check_seed(seed)
    if not 0 <= start <= stop:
        raise ValueError(f"bad index range [{start}, {stop})")
    block = start // _PHILOX_LANES
    skip = start - block * _PHILOX_LANES
    bg = np.random.Philox(key=seed)
    state = bg.state
    state["state"]["counter"] = np.array([block, 0, 0, 0], dtype=np.uint64)
    state["buffer_pos"] = _PHILOX_LANES
    bg.state = state
    raw = bg.random_raw(stop - start + skip)[skip:]
    # top 53 bits, centred in their cell so 0 and 1 are never produced
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


@dataclass(frozen=True, eq=False)
class SampleBatch:
    seed: int
    n: int
    alphas: np.ndarray = field(repr=False)
    losses: np.ndarray = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, SampleBatch):
            return NotImplemented
        return (self.seed == other.seed and self.n == other.n
                and self.alphas.tobytes() == other.alphas.tobytes()
                and self.losses.tobytes() == other.losses.tobytes())


def sample_alphas(dist: AlphaDistribution, n: int, seed: int, workers: int = 1,
                  chunk_size: int = DEFAULT_CHUNK) -> np.ndarray:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    bounds = [(s, min(s + chunk_size, n)) for s in range(0, n, chunk_size)]

    def draw(bound):
        return dist.quantile(uniform_stream(seed, *bound))

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, bounds))
    else:
        parts = [draw(b) for b in bounds]
    return np.concatenate(parts)


def sample_losses(dist: AlphaDistribution, spec: BranchSpec, lossmap: LossMap, n: int, seed: int,
                  workers: int = 1) -> SampleBatch:
    """Inverse-CDF draws of alpha and their losses; independent of ``workers``."""
    seed = _check_seed(seed)
    if not dist.has_threshold_mass(spec.alpha_c):
        raise NoThresholdMass(
            f"{dist.family.value}{dist.parameters} puts no mass above alpha_c={spec.alpha_c}")
    alphas = sample_alphas(dist, int(n), seed, workers)
    return SampleBatch(seed, int(n), alphas, losses(spec, lossmap, alphas))
