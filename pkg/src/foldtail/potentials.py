"""One-parameter polynomial potentials V(x; alpha) and their equilibria.

Three families are supported:

* ``Fold``: ``V = x**3 - alpha*x``
* ``Cusp``: ``V = x**4/4 + a(alpha)*x**2/2 + b(alpha)*x`` with ``a``, ``b`` affine in alpha
* ``CustomPolynomial``: ``V = sum_k (c_k + d_k*alpha) * x**k``, degree 2..6

Equilibria are the real roots of dV/dx, classified by the sign of d2V/dx2.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateLeadingCoefficient, NoBranchOnSide, NoTransitionInRange

TOL_ROOT = 1e-10
TOL_HESS = 1e-8
MAX_DEGREE = 6

# relative size below which a leading coefficient counts as vanished
_LEAD_EPS = 1e-14


class Form(str, enum.Enum):
    FOLD = "Fold"
    CUSP = "Cusp"
    CUSTOM = "CustomPolynomial"


class Kind(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    DEGENERATE = "Degenerate"


class Side(str, enum.Enum):
    ABOVE = "Above"
    BELOW = "Below"


@dataclass(frozen=True)
class PotentialModel:
    form: Form
    coefficients: tuple[float, ...] = ()
    alpha_range: tuple[float, float] | None = None

    def __post_init__(self):
        form = Form(self.form)
        coeffs = tuple(float(c) for c in self.coefficients)
        object.__setattr__(self, "form", form)
        object.__setattr__(self, "coefficients", coeffs)
        if self.alpha_range is not None:
            lo, hi = (float(v) for v in self.alpha_range)
            if not lo < hi:
                raise ValueError(f"alpha_range must satisfy lo < hi, got {self.alpha_range}")
            object.__setattr__(self, "alpha_range", (lo, hi))

        if form is Form.FOLD and coeffs:
            raise ValueError("Fold potential takes no coefficients")
        if form is Form.CUSP and len(coeffs) != 4:
            raise ValueError("Cusp potential takes exactly four coefficients [a0, a1, b0, b1]")
        if form is Form.CUSTOM:
            if len(coeffs) % 2 or not coeffs:
                raise ValueError("CustomPolynomial coefficients must be interleaved pairs [c0, d0, c1, d1, ...]")
            deg = self.degree
            if not 2 <= deg <= MAX_DEGREE:
                raise ValueError(f"polynomial degree must be in [2, {MAX_DEGREE}], got {deg}")
            if self.alpha_range is not None:
                lo, hi = self.alpha_range
                for a in (lo, 0.5 * (lo + hi), hi):
                    if self.coefficients_at(a)[deg] == 0.0:
                        raise DegenerateLeadingCoefficient(
                            f"leading coefficient of x^{deg} vanishes at alpha={a}")

    @classmethod
    def fold(cls, alpha_range=None) -> "PotentialModel":
        return cls(Form.FOLD, (), alpha_range)

    @classmethod
    def cusp(cls, a0, a1, b0, b1, alpha_range=None) -> "PotentialModel":
        return cls(Form.CUSP, (a0, a1, b0, b1), alpha_range)

    @classmethod
    def custom(cls, coefficients: Sequence[float], alpha_range=None) -> "PotentialModel":
        return cls(Form.CUSTOM, tuple(coefficients), alpha_range)

    @property
    def degree(self) -> int:
        if self.form is Form.FOLD:
            return 3
        if self.form is Form.CUSP:
            return 4
        pairs = list(zip(self.coefficients[0::2], self.coefficients[1::2]))
        deg = 0
        for k, (c, d) in enumerate(pairs):
            if c != 0.0 or d != 0.0:
                deg = k
        return deg

    def coefficients_at(self, alpha: float) -> np.ndarray:
        """Coefficients of V in x at fixed alpha, ascending powers, trimmed to the degree."""
        alpha = float(alpha)
        if self.form is Form.FOLD:
            return np.array([0.0, -alpha, 0.0, 1.0])
        if self.form is Form.CUSP:
            a0, a1, b0, b1 = self.coefficients
            a = a0 + a1 * alpha
            b = b0 + b1 * alpha
            return np.array([0.0, b, 0.5 * a, 0.0, 0.25])
        c = np.asarray(self.coefficients[0::2])
        d = np.asarray(self.coefficients[1::2])
        return (c + d * alpha)[: self.degree + 1]


@dataclass(frozen=True)
class Equilibrium:
    location: float
    kind: Kind


@dataclass(frozen=True)
class EquilibriumSet:
    alpha: float
    equilibria: tuple[Equilibrium, ...]

    @property
    def locations(self) -> list[float]:
        return [e.location for e in self.equilibria]

    @property
    def stable_count(self) -> int:
        return sum(e.kind is Kind.STABLE for e in self.equilibria)

    def __len__(self):
        return len(self.equilibria)


@dataclass(frozen=True)
class CriticalThreshold:
    alpha_c: float
    bracket: tuple[float, float]


def _derivative(coeffs: np.ndarray) -> np.ndarray:
    k = np.arange(1, len(coeffs))
    return coeffs[1:] * k


def _horner(coeffs: np.ndarray, x: float) -> float:
    # highest degree first
    acc = 0.0
    for c in coeffs[::-1]:
        acc = acc * x + c
    return float(acc)


def evaluate(model: PotentialModel, x: float, alpha: float, derivative_order: int = 0) -> float:
    """V, dV/dx or d2V/dx2 at (x, alpha)."""
    if derivative_order not in (0, 1, 2):
        raise ValueError(f"derivative_order must be 0, 1 or 2, got {derivative_order}")
    coeffs = model.coefficients_at(alpha)
    for _ in range(derivative_order):
        coeffs = _derivative(coeffs)
    return _horner(coeffs, float(x))


def _solve_quadratic(a: float, b: float, c: float) -> list[float]:
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    if disc == 0.0:
        return [-b / (2.0 * a)]
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    return [q / a, c / q]


def _solve_cubic(a: float, b: float, c: float, d: float) -> list[float]:
    B, C, D = b / a, c / a, d / a
    shift = -B / 3.0
    p = C - B * B / 3.0
    q = 2.0 * B ** 3 / 27.0 - B * C / 3.0 + D
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc < 0.0:
        r = math.sqrt(-p / 3.0)
        cos_arg = max(-1.0, min(1.0, (-q / 2.0) / r ** 3))
        phi = math.acos(cos_arg)
        ts = [2.0 * r * math.cos((phi - 2.0 * math.pi * k) / 3.0) for k in range(3)]
    elif disc > 0.0:
        A = -math.copysign(np.cbrt(abs(q) / 2.0 + math.sqrt(disc)), q)
        ts = [A - p / (3.0 * A)] if A != 0.0 else [0.0]
    elif p == 0.0:
        ts = [0.0]
    else:
        ts = [3.0 * q / p, -1.5 * q / p]
    return [t + shift for t in ts]


def _polish(dcoeffs: np.ndarray, d2coeffs: np.ndarray, x: float) -> float:
    f = _horner(dcoeffs, x)
    fp = _horner(d2coeffs, x)
    if fp == 0.0 or f == 0.0:
        return x
    x1 = x - f / fp
    return x1 if abs(_horner(dcoeffs, x1)) < abs(f) else x


def _residual_ok(dcoeffs: np.ndarray, z: float) -> bool:
    return abs(_horner(dcoeffs, z)) <= TOL_ROOT * (1.0 + abs(z))


def _merge(roots: Iterable[float], tol: float) -> list[float]:
    out: list[float] = []
    for z in sorted(roots):
        if out and abs(z - out[-1]) <= tol * (1.0 + abs(z)):
            out[-1] = 0.5 * (out[-1] + z)
        else:
            out.append(z)
    return out


def classify(model: PotentialModel, z: float, alpha: float) -> Kind:
    h = evaluate(model, z, alpha, 2)
    if h > TOL_HESS:
        return Kind.STABLE
    if h < -TOL_HESS:
        return Kind.UNSTABLE
    return Kind.DEGENERATE


def find_equilibria(model: PotentialModel, alpha: float) -> EquilibriumSet:
    alpha = float(alpha)
    dc = _derivative(model.coefficients_at(alpha))
    d2c = _derivative(dc)
    lead = dc[-1]
    if lead == 0.0 or abs(lead) <= _LEAD_EPS * np.max(np.abs(dc)):
        raise DegenerateLeadingCoefficient(f"derivative leading coefficient vanishes at alpha={alpha}")

    deg = len(dc) - 1
    if deg == 1:
        roots, merge_tol = [-dc[0] / dc[1]], 0.0
    elif deg == 2:
        roots, merge_tol = _solve_quadratic(dc[2], dc[1], dc[0]), 1e-12
    elif deg == 3:
        roots, merge_tol = _solve_cubic(dc[3], dc[2], dc[1], dc[0]), 1e-12
    else:
        # companion-matrix eigenvalues; near-real candidates survive only if they polish to a root
        cand = np.roots(dc[::-1])
        roots = [float(z.real) for z in cand if abs(z.imag) <= 1e-4 * (1.0 + abs(z.real))]
        merge_tol = 1e-7

    polished = [_polish(dc, d2c, float(z)) for z in roots]
    polished = [z for z in polished if math.isfinite(z) and _residual_ok(dc, z)]
    locs = _merge(polished, merge_tol) if merge_tol else sorted(polished)
    eq = tuple(Equilibrium(z + 0.0, classify(model, z, alpha)) for z in locs)
    return EquilibriumSet(alpha, eq)


def find_critical_threshold(model: PotentialModel, alpha_range: tuple[float, float] | None = None,
                            max_iter: int = 200) -> CriticalThreshold:
    """Bisect on alpha using the number of stable equilibria as the predicate."""
    if alpha_range is None:
        alpha_range = model.alpha_range
    if alpha_range is None:
        raise ValueError("alpha_range required")
    lo, hi = (float(v) for v in alpha_range)
    n_lo = find_equilibria(model, lo).stable_count
    n_hi = find_equilibria(model, hi).stable_count
    if n_lo == n_hi:
        raise NoTransitionInRange(
            f"stable-equilibrium count is {n_lo} at both ends of [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= 1e-13 * (1.0 + abs(mid)):
            break
        if find_equilibria(model, mid).stable_count == n_lo:
            lo = mid
        else:
            hi = mid
    return CriticalThreshold(0.5 * (lo + hi), (lo, hi))


def _reference_point(model: PotentialModel, alpha_c: float, sign: float) -> float | None:
    for a in (alpha_c, alpha_c + sign * 1e-12 * (1.0 + abs(alpha_c))):
        eqs = find_equilibria(model, a).equilibria
        if eqs:
            # the bifurcating equilibrium is the most degenerate one
            return min(eqs, key=lambda e: abs(evaluate(model, e.location, a, 2))).location
    return None


def branch_exponent_estimate(model: PotentialModel, alpha_c: float, side: Side | str = Side.ABOVE,
                             n_offsets: int = 8, offset_range=(1e-6, 1e-3)) -> float:
    """Log-log slope of |x*(alpha) - x*(alpha_c)| against |alpha - alpha_c|."""
    side = Side(side)
    sign = 1.0 if side is Side.ABOVE else -1.0
    ref = _reference_point(model, alpha_c, sign)
    if ref is None:
        raise NoBranchOnSide(f"no equilibria near alpha_c={alpha_c}")
    offsets = np.geomspace(offset_range[0], offset_range[1], n_offsets)
    dists = []
    for off in offsets:
        eqs = find_equilibria(model, alpha_c + sign * off).equilibria
        moving = [e for e in eqs if abs(e.location - ref) > 0.0]
        if not moving:
            raise NoBranchOnSide(f"no equilibrium branch {side.value.lower()} alpha_c={alpha_c}")
        stable = [e for e in moving if e.kind is Kind.STABLE]
        pool = stable or moving
        dists.append(min(abs(e.location - ref) for e in pool))
    slope, _ = np.polyfit(np.log(offsets), np.log(dists), 1)
    return float(slope)


def equilibrium_branches(model: PotentialModel, alphas: Iterable[float]) -> list[tuple[float, float, Kind]]:
    """(alpha, x*, kind) rows over an alpha grid, for branch diagrams."""
    rows = []
    for a in alphas:
        try:
            eqs = find_equilibria(model, float(a))
        except DegenerateLeadingCoefficient:
            continue
        rows.extend((float(a), e.location, e.kind) for e in eqs.equilibria)
    return rows
