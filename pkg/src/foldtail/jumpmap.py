"""Post-crossing branch, loss map and the threshold offset eta(y).

Below the critical value the loss is a constant baseline. Above it the
system sits on a power-law branch ``x(alpha) = C * (alpha - alpha_c)**(-+m)``
and the loss is ``|x|**p``. ``eta`` inverts the loss back to an offset
from ``alpha_c``, which turns loss exceedances into events on alpha.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import BelowThreshold, NoHeavyTailRegime, NotInvertible

if TYPE_CHECKING:
    from .sampling import AlphaDistribution


class Mode(str, enum.Enum):
    DIVERGENT = "Divergent"
    BOUNDED = "Bounded"


class Regime(str, enum.Enum):
    FLUCTUATION_DRIVEN = "FluctuationDriven"
    PARAMETER_TAIL_DRIVEN = "ParameterTailDriven"


@dataclass(frozen=True)
class BranchSpec:
    mode: Mode
    m: float
    C: float = 1.0
    alpha_c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("m", "C"):
            v = float(getattr(self, name))
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "alpha_c", float(self.alpha_c))

    @property
    def signed_exponent(self) -> float:
        return -self.m if self.mode is Mode.DIVERGENT else self.m


@dataclass(frozen=True)
class LossMap:
    p: float
    baseline: float = 0.0

    def __post_init__(self):
        p, baseline = float(self.p), float(self.baseline)
        if not (p > 0 and math.isfinite(p)):
            raise ValueError(f"p must be positive and finite, got {p}")
        if not (baseline >= 0 and math.isfinite(baseline)):
            raise ValueError(f"baseline must be finite and >= 0, got {baseline}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "baseline", baseline)

    def __call__(self, x):
        return np.abs(x) ** self.p


@dataclass(frozen=True)
class TailPrediction:
    xi_predicted: float
    regime: Regime
    exponent_product: float


def branch_value(spec: BranchSpec, alpha: float) -> float:
    if not alpha > spec.alpha_c:
        raise BelowThreshold(f"alpha={alpha} is not above alpha_c={spec.alpha_c}")
    return float(spec.C * (float(alpha) - spec.alpha_c) ** spec.signed_exponent)


def losses(spec: BranchSpec, lossmap: LossMap, alphas) -> np.ndarray:
    """Vectorised loss; ``loss`` delegates here so both paths give identical bits."""
    a = np.asarray(alphas, dtype=np.float64)
    d = a - spec.alpha_c
    out = np.full(a.shape, lossmap.baseline, dtype=np.float64)
    above = d > 0
    with np.errstate(divide="ignore", over="ignore"):
        x = spec.C * np.power(d[above], spec.signed_exponent)
        out[above] = lossmap(x)
    at = d == 0
    if np.any(at):
        out[at] = np.inf if spec.mode is Mode.DIVERGENT else max(0.0, lossmap.baseline)
    return out


def loss(spec: BranchSpec, lossmap: LossMap, alpha: float) -> float:
    """Loss at a single alpha: baseline below alpha_c, |x(alpha)|**p from alpha_c on.

    At exactly alpha_c a Divergent branch returns +inf.
    """
    return float(losses(spec, lossmap, np.array([alpha]))[0])


def eta(spec: BranchSpec, lossmap: LossMap, y: float) -> float:
    """Offset such that ``loss(alpha_c + eta(y)) == y``."""
    y = float(y)
    if not (y > lossmap.baseline and y > 0):
        raise NotInvertible(f"y={y} must exceed the baseline {lossmap.baseline} and 0")
    mp = spec.m * lossmap.p
    cp = spec.C ** lossmap.p
    if spec.mode is Mode.DIVERGENT:
        return (cp / y) ** (1.0 / mp)
    return (y / cp) ** (1.0 / mp)


def _positive_density_at(dist: "AlphaDistribution", a: float) -> bool:
    h = 1e-9 * (1.0 + abs(a))
    dens = max(dist.density(a), dist.density(a + h))
    return math.isfinite(dens) and dens > 0.0


def predict_tail(spec: BranchSpec, lossmap: LossMap, alpha_dist: "AlphaDistribution") -> TailPrediction:
    """Predicted GPD shape of the loss tail.

    Divergent branch with alpha density positive at alpha_c: shape m*p.
    Bounded branch with Pareto alpha of tail index a: shape m*p/a.
    """
    from .sampling import Family

    mp = spec.m * lossmap.p
    if spec.mode is Mode.DIVERGENT:
        if _positive_density_at(alpha_dist, spec.alpha_c):
            return TailPrediction(mp, Regime.FLUCTUATION_DRIVEN, mp)
        raise NoHeavyTailRegime(
            "Divergent branch needs positive alpha density at alpha_c for a heavy loss tail")
    if alpha_dist.family is Family.PARETO:
        return TailPrediction(mp / alpha_dist.tail_index, Regime.PARAMETER_TAIL_DRIVEN, mp)
    raise NoHeavyTailRegime(
        f"Bounded branch with {alpha_dist.family.value} alpha has no Pareto-type loss tail")
