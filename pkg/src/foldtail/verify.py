"""Executable checks that loss exceedances are threshold crossings of alpha.

``check_event_equivalence`` compares, sample by sample, the loss event
{Y > y} with the alpha event it should coincide with. ``check_tail_match``
compares the empirical loss survival with the survival implied by the
alpha distribution, and the fitted GPD shape with the predicted one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGrid, TooFewExceedances
from .evt import GpdFit, empirical_survival_curve, extract_exceedances, fit_gpd_mle
from .jumpmap import BranchSpec, LossMap, Mode, TailPrediction, eta, predict_tail
from .sampling import AlphaDistribution, SampleBatch

BOUNDARY_BAND = 1e-12
MIN_TAIL_EXCEEDANCES = 1000
TOP_QUANTILE = 0.9999


@dataclass(frozen=True, eq=False)
class EquivalenceReport:
    y_grid: np.ndarray
    mismatches_per_y: np.ndarray
    boundary_excluded_per_y: np.ndarray
    subset_violations_per_y: np.ndarray
    n: int

    @property
    def passed(self) -> bool:
        return not (self.mismatches_per_y.any() or self.subset_violations_per_y.any())


@dataclass(frozen=True, eq=False)
class TailMatchReport:
    y_grid: np.ndarray
    empirical_survival: np.ndarray
    analytic_survival: np.ndarray
    xi_fitted: float
    xi_predicted: float
    relative_gap: float
    n: int
    u: float
    fit: GpdFit = field(repr=False)
    prediction: TailPrediction = field(repr=False)

    @property
    def band(self) -> np.ndarray:
        """Pointwise three-sigma binomial band around the analytic survival."""
        s = self.analytic_survival
        return 3.0 * np.sqrt(s * (1.0 - s) / self.n)

    @property
    def within_band(self) -> np.ndarray:
        return np.abs(self.empirical_survival - self.analytic_survival) <= self.band

    @property
    def analytic_valid(self) -> bool:
        s = self.analytic_survival
        return bool(np.all((s >= 0) & (s <= 1)) and np.all(np.diff(s) <= 0))

    def gpd_survival(self) -> np.ndarray:
        """Unconditional GPD tail estimate: exceedance rate times fitted conditional survival."""
        rate = self.fit.n_exceedances / self.n
        return rate * self.fit.survival(self.y_grid)


def alpha_event(alphas: np.ndarray, spec: BranchSpec, offset: float) -> np.ndarray:
    """Alpha-side event matching {loss > y} for a threshold offset eta(y)."""
    if spec.mode is Mode.BOUNDED:
        return alphas > spec.alpha_c + offset
    return (alphas > spec.alpha_c) & (alphas < spec.alpha_c + offset)


def check_event_equivalence(batch: SampleBatch, spec: BranchSpec, lossmap: LossMap,
                            y_grid) -> EquivalenceReport:
    ys = np.asarray(y_grid, dtype=np.float64)
    if ys.ndim != 1 or ys.size == 0 or not np.all(np.isfinite(ys)):
        raise InvalidGrid("y_grid must be a nonempty 1-d array of finite values")
    if np.any(ys <= lossmap.baseline) or np.any(ys <= 0):
        raise InvalidGrid(f"every y must exceed the baseline {lossmap.baseline} and 0")
    alphas, ls = batch.alphas, batch.losses
    crossed = alphas >= spec.alpha_c
    mismatches, excluded, subset = [], [], []
    for y in ys:
        lhs = ls > y
        rhs = alpha_event(alphas, spec, eta(spec, lossmap, y))
        band = np.abs(ls - y) <= BOUNDARY_BAND * y
        excluded.append(int(np.count_nonzero(band)))
        mismatches.append(int(np.count_nonzero((lhs != rhs) & ~band)))
        subset.append(int(np.count_nonzero(lhs & ~crossed)))
    return EquivalenceReport(ys, np.array(mismatches), np.array(excluded), np.array(subset), batch.n)


def analytic_survival(dist: AlphaDistribution, spec: BranchSpec, lossmap: LossMap, y_grid) -> np.ndarray:
    """Pr(Y > y) computed from the alpha distribution through eta."""
    offsets = np.array([eta(spec, lossmap, y) for y in np.asarray(y_grid, dtype=np.float64)])
    upper = np.asarray(dist.cdf(spec.alpha_c + offsets))
    if spec.mode is Mode.BOUNDED:
        return 1.0 - upper
    return np.clip(upper - dist.cdf(spec.alpha_c), 0.0, 1.0)


def tail_grid(losses: np.ndarray, u_quantile: float, size: int = 20) -> np.ndarray:
    lo = float(np.quantile(losses, u_quantile))
    hi = float(np.quantile(losses, TOP_QUANTILE))
    if not (lo > 0 and hi > lo and np.isfinite(hi)):
        raise TooFewExceedances(f"loss quantiles [{lo}, {hi}] do not span a tail")
    return np.geomspace(lo, hi, size)


def check_tail_match(batch: SampleBatch, spec: BranchSpec, lossmap: LossMap, dist: AlphaDistribution,
                     u_quantile: float = 0.99, grid_size: int = 20) -> TailMatchReport:
    if not 0 < u_quantile < 1:
        raise ValueError(f"u_quantile must lie in (0, 1), got {u_quantile}")
    prediction = predict_tail(spec, lossmap, dist)
    ls = batch.losses
    u = float(np.quantile(ls, u_quantile))
    exc = extract_exceedances(ls, u)
    if exc.count < MIN_TAIL_EXCEEDANCES:
        raise TooFewExceedances(
            f"{exc.count} losses above the {u_quantile} quantile, need {MIN_TAIL_EXCEEDANCES}")
    ys = tail_grid(ls, u_quantile, grid_size)
    fit = fit_gpd_mle(exc)
    xi_p = prediction.xi_predicted
    gap = abs(fit.xi - xi_p) / max(xi_p, 0.05)
    return TailMatchReport(
        y_grid=ys,
        empirical_survival=empirical_survival_curve(ls, ys),
        analytic_survival=analytic_survival(dist, spec, lossmap, ys),
        xi_fitted=fit.xi,
        xi_predicted=xi_p,
        relative_gap=gap,
        n=batch.n,
        u=u,
        fit=fit,
        prediction=prediction,
    )
