"""Peaks-over-threshold statistics: exceedances, GPD fits, Hill, mean excess."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateExcesses, DegenerateHill, EmptySample, InsufficientPositiveValues,
                     PwmDegenerate, TooFewExceedances)

MIN_EXCEEDANCES = 30
MIN_HILL_K = 10
MIN_MEAN_EXCESS_COUNT = 10
_EXP_LIMIT = 1e-10
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class FitMethod(str, enum.Enum):
    MLE = "MLE"
    PWM = "PWM"


@dataclass(frozen=True, eq=False)
class ExceedanceSet:
    u: float
    excesses: np.ndarray = field(repr=False)
    n_total: int

    @property
    def count(self) -> int:
        return len(self.excesses)

    @property
    def rate(self) -> float:
        return self.count / self.n_total if self.n_total else 0.0


@dataclass(frozen=True)
class GpdFit:
    xi: float
    beta: float
    log_likelihood: float
    method: FitMethod
    n_exceedances: int
    u: float = 0.0

    @property
    def xi_se(self) -> float:
        """Asymptotic MLE standard error of the shape (valid for xi > -1/2)."""
        return (1.0 + self.xi) / math.sqrt(self.n_exceedances) if self.xi > -0.5 else math.nan

    @property
    def beta_se(self) -> float:
        return self.beta * math.sqrt(2.0 * (1.0 + self.xi) / self.n_exceedances) if self.xi > -0.5 else math.nan

    def survival(self, y):
        """Conditional survival Pr(Y > y | Y > u); equals 1 at y = u."""
        return gpd_survival(np.asarray(y, dtype=np.float64) - self.u, self.xi, self.beta)


@dataclass(frozen=True)
class HillEstimate:
    k: int
    hill: float

    @property
    def tail_index(self) -> float:
        return 1.0 / self.hill


@dataclass(frozen=True)
class MeanExcessPoint:
    u: float
    mean_excess: float
    count: int

    @property
    def flagged(self) -> bool:
        return self.count < MIN_MEAN_EXCESS_COUNT


def gpd_survival(z, xi: float, beta: float):
    """GPD survival ``(1 + xi*z/beta)**(-1/xi)`` of excesses z >= 0."""
    z = np.maximum(np.asarray(z, dtype=np.float64), 0.0)
    if abs(xi) < _EXP_LIMIT:
        out = np.exp(-z / beta)
    else:
        base = 1.0 + xi * z / beta
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(base > 0.0, np.exp(-np.log(np.maximum(base, 0.0)) / xi), 0.0)
    return float(out) if out.ndim == 0 else out


def gpd_log_likelihood(z, xi: float, beta: float) -> float:
    z = np.asarray(z, dtype=np.float64)
    if beta <= 0:
        return -math.inf
    n = len(z)
    if abs(xi) < _EXP_LIMIT:
        return float(-n * math.log(beta) - z.sum() / beta)
    arg = xi * z / beta
    if np.any(arg <= -1.0):
        return -math.inf
    return float(-n * math.log(beta) - (1.0 + 1.0 / xi) * np.log1p(arg).sum())


def gpd_score(z, xi: float, beta: float) -> np.ndarray:
    """Gradient of the mean GPD log-likelihood with respect to (xi, beta)."""
    z = np.asarray(z, dtype=np.float64)
    if abs(xi) < _EXP_LIMIT:
        d_beta = np.mean(z / beta ** 2) - 1.0 / beta
        d_xi = np.mean(0.5 * (z / beta) ** 2 - z / beta)
        return np.array([d_xi, d_beta])
    w = xi * z / beta
    lg = np.log1p(w)
    d_xi = np.mean(lg / xi ** 2 - (1.0 + 1.0 / xi) * (z / beta) / (1.0 + w))
    d_beta = np.mean(-1.0 / beta + (1.0 + xi) * z / (beta ** 2 * (1.0 + w)))
    return np.array([d_xi, d_beta])


def empirical_survival(sample, y) -> float:
    s = np.asarray(sample, dtype=np.float64)
    if s.size == 0:
        raise EmptySample("empirical survival of an empty sample")
    return float(np.count_nonzero(s > y)) / s.size


def empirical_survival_curve(sample, ys) -> np.ndarray:
    """empirical_survival over many y at once (sorts the sample once)."""
    s = np.sort(np.asarray(sample, dtype=np.float64))
    if s.size == 0:
        raise EmptySample("empirical survival of an empty sample")
    return (s.size - np.searchsorted(s, np.asarray(ys, dtype=np.float64), side="right")) / s.size


def extract_exceedances(sample, u: float) -> ExceedanceSet:
    s = np.asarray(sample, dtype=np.float64)
    return ExceedanceSet(float(u), s[s > u] - u, int(s.size))


def _check_excesses(exc: ExceedanceSet) -> np.ndarray:
    z = np.asarray(exc.excesses, dtype=np.float64)
    if z.size < MIN_EXCEEDANCES:
        raise TooFewExceedances(f"{z.size} exceedances, need at least {MIN_EXCEEDANCES}")
    return z


def _profile(z: np.ndarray, theta: float) -> tuple[float, float]:
    """(xi, beta) maximising the likelihood for fixed theta = xi / beta."""
    if abs(theta) < _EXP_LIMIT:
        return 0.0, float(z.mean())
    xi = float(np.log1p(theta * z).mean())
    return xi, xi / theta


def _profile_loglik(z: np.ndarray, theta: float) -> float:
    if np.any(theta * z <= -1.0):
        return -math.inf
    xi, beta = _profile(z, theta)
    if not beta > 0:
        return -math.inf
    if xi == 0.0:
        return -z.size * (math.log(beta) + 1.0)
    return -z.size * (math.log(beta) + 1.0 + xi)


def _profile_dtheta(z: np.ndarray, theta: float) -> tuple[float, float]:
    """First and second derivative of the mean profile log-likelihood in theta."""
    w = theta * z
    lg = np.log1p(w)
    xi = lg.mean()
    r = z / (1.0 + w)
    m1 = r.mean()
    m2 = (r * r).mean()
    # l(theta)/n = log(theta) - log(xi) - 1 - xi
    d1 = 1.0 / theta - m1 / xi - m1
    d2 = -1.0 / theta ** 2 + m2 / xi + (m1 / xi) ** 2 + m2
    return d1, d2


def fit_gpd_mle(exc: ExceedanceSet, iterations: int = 200) -> GpdFit:
    """Profile-likelihood GPD fit by golden-section search on theta = xi / beta.

    The search runs on excesses divided by their median, so the theta bracket
    [-1/max(z) + 1e-8, 10] is in units of the data scale (it then covers
    shapes up to about 3.4 whatever beta is).
    """
    z_raw = _check_excesses(exc)
    if np.all(z_raw == z_raw[0]):
        raise DegenerateExcesses("all excesses are equal")
    scale = float(np.median(z_raw)) or float(z_raw.mean())
    z = z_raw / scale
    zmax = float(z.max())
    a, b = -1.0 / zmax + 1e-8, 10.0
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = _profile_loglik(z, c), _profile_loglik(z, d)
    for _ in range(iterations):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _profile_loglik(z, c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = _profile_loglik(z, d)
    theta = 0.5 * (a + b)
    best = _profile_loglik(z, theta)

    # golden section stalls at ~sqrt(eps) relative; a few guarded Newton steps finish the job
    if abs(theta) >= _EXP_LIMIT:
        for _ in range(8):
            d1, d2 = _profile_dtheta(z, theta)
            if not (d2 < 0 and math.isfinite(d1)) or d1 == 0.0:
                break
            cand = theta - d1 / d2
            val = _profile_loglik(z, cand)
            if not val >= best:
                break
            theta, best = cand, val

    xi, beta = _profile(z, theta)
    beta *= scale
    return GpdFit(xi, beta, gpd_log_likelihood(z_raw, xi, beta), FitMethod.MLE, int(z.size), exc.u)


def fit_gpd_pwm(exc: ExceedanceSet) -> GpdFit:
    """Probability-weighted-moment GPD fit (Hosking & Wallis)."""
    z = np.sort(_check_excesses(exc))
    n = z.size
    i = np.arange(1, n + 1)
    a0 = z.mean()
    # weights (n - i)/(n - 1) on ascending order statistics estimate E[Z (1 - F(Z))]
    a1 = float(np.sum(z * (n - i) / (n - 1.0)) / n)
    denom = a0 - 2.0 * a1
    if not denom > 1e-15 * abs(a0):
        raise PwmDegenerate("probability-weighted moments are degenerate (a0 - 2 a1 <= 0)")
    xi = 2.0 - a0 / denom
    beta = 2.0 * a0 * a1 / denom
    return GpdFit(float(xi), float(beta), gpd_log_likelihood(z, xi, beta), FitMethod.PWM, int(n), exc.u)


def hill_estimator(sample, k: int) -> HillEstimate:
    k = int(k)
    if k < MIN_HILL_K:
        raise ValueError(f"k must be at least {MIN_HILL_K}, got {k}")
    s = np.asarray(sample, dtype=np.float64)
    pos = s[s > 0]
    if pos.size < k + 1:
        raise InsufficientPositiveValues(f"need {k + 1} positive values, have {pos.size}")
    top = np.partition(pos, pos.size - k - 1)[pos.size - k - 1:]
    ref = top.min()
    logs = np.log(np.sort(top)[1:] / ref)
    hill = float(logs.mean())
    if hill == 0.0:
        raise DegenerateHill("top order statistics are all equal")
    return HillEstimate(k, hill)


def hill_curve(sample, ks) -> list[HillEstimate]:
    s = np.sort(np.asarray(sample, dtype=np.float64))
    s = s[s > 0]
    logs = np.log(s[::-1])
    out = []
    for k in ks:
        k = int(k)
        if k < MIN_HILL_K or k + 1 > s.size:
            continue
        hill = float(logs[:k].mean() - logs[k])
        if hill > 0:
            out.append(HillEstimate(k, hill))
    return out


def mean_excess_curve(sample, thresholds) -> list[MeanExcessPoint]:
    s = np.sort(np.asarray(sample, dtype=np.float64))
    us = np.asarray(thresholds, dtype=np.float64)
    if np.any(np.diff(us) < 0):
        raise ValueError("thresholds must be ascending")
    # suffix sums make each threshold O(log n)
    suffix = np.concatenate([np.cumsum(s[::-1])[::-1], [0.0]])
    out = []
    for u in us:
        j = int(np.searchsorted(s, u, side="right"))
        count = s.size - j
        me = (suffix[j] - count * u) / count if count else math.nan
        out.append(MeanExcessPoint(float(u), float(me), int(count)))
    return out
