import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as P

from foldtail.errors import DegenerateLeadingCoefficient, NoBranchOnSide, NoTransitionInRange
from foldtail.potentials import (Kind, PotentialModel, TOL_ROOT, branch_exponent_estimate, evaluate,
                                 find_critical_threshold, find_equilibria)

FOLD = PotentialModel.fold()


@pytest.mark.parametrize("model,x,alpha,order,expected", [
    (FOLD, 1.0, 0.0, 0, 1.0),
    (FOLD, 2.0, 3.0, 1, 9.0),
    (PotentialModel.cusp(0, 1, 0, 0), 2.0, 1.0, 2, 13.0),
])
def test_evaluate_examples(model, x, alpha, order, expected):
    assert evaluate(model, x, alpha, order) == expected


def test_evaluate_rejects_order():
    with pytest.raises(ValueError):
        evaluate(FOLD, 0.0, 0.0, 3)


def test_fold_equilibria_examples():
    eq = find_equilibria(FOLD, 3.0)
    assert eq.locations == [-1.0, 1.0]
    assert [e.kind for e in eq.equilibria] == [Kind.UNSTABLE, Kind.STABLE]
    assert evaluate(FOLD, -1.0, 3.0, 2) == -6.0 and evaluate(FOLD, 1.0, 3.0, 2) == 6.0

    eq0 = find_equilibria(FOLD, 0.0)
    assert eq0.locations == [0.0] and eq0.equilibria[0].kind is Kind.DEGENERATE
    assert len(find_equilibria(FOLD, -1.0)) == 0


def test_model_validation():
    with pytest.raises(ValueError):
        PotentialModel("Fold", (1.0,))
    with pytest.raises(ValueError):
        PotentialModel("Cusp", (1.0, 2.0))
    with pytest.raises(ValueError):
        PotentialModel.custom([0, 0, 1, 0])  # degree 1
    with pytest.raises(ValueError):
        PotentialModel.custom([0, 0] * 7 + [1, 0])  # degree 7
    with pytest.raises(DegenerateLeadingCoefficient):
        # leading coefficient alpha vanishes at the range midpoint
        PotentialModel.custom([0, 0, 0, 0, 0, 1], alpha_range=(-1, 1))


def test_degenerate_leading_coefficient_at_alpha():
    model = PotentialModel.custom([0, 0, 1, 0, 0, 0, 0, 1])  # x + alpha x^3
    with pytest.raises(DegenerateLeadingCoefficient):
        find_equilibria(model, 0.0)
    assert len(find_equilibria(model, -1.0)) == 2


def test_fold_closed_form_random():
    rng = np.random.default_rng(11)
    for a in rng.uniform(1e-6, 10.0, 1000):
        locs = find_equilibria(FOLD, a).locations
        r = math.sqrt(a / 3.0)
        assert len(locs) == 2
        assert abs(locs[0] + r) <= 1e-12 * r and abs(locs[1] - r) <= 1e-12 * r


def _random_model(rng):
    kind = rng.integers(3)
    if kind == 0:
        return FOLD
    if kind == 1:
        return PotentialModel.cusp(*rng.uniform(-2, 2, 4))
    deg = int(rng.integers(2, 7))
    coeffs = rng.uniform(-1, 1, 2 * (deg + 1))
    coeffs[2 * deg] = rng.choice([-1, 1]) * rng.uniform(0.5, 1.0)
    coeffs[2 * deg + 1] = 0.0
    return PotentialModel.custom(coeffs)


def test_equilibria_residual_and_order_random():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        model = _random_model(rng)
        alpha = rng.uniform(-3, 3)
        eq = find_equilibria(model, alpha)
        locs = eq.locations
        assert all(b > a for a, b in zip(locs, locs[1:]))
        for e in eq.equilibria:
            z = e.location
            assert abs(evaluate(model, z, alpha, 1)) <= TOL_ROOT * (1 + abs(z))
            h = evaluate(model, z, alpha, 2)
            expected = Kind.STABLE if h > 1e-8 else Kind.UNSTABLE if h < -1e-8 else Kind.DEGENERATE
            assert e.kind is expected


def _brute_root_count(coeffs_ascending, lo=-20.0, hi=20.0, n=200001):
    """Sign changes of dV/dx on a dense grid: an oracle independent of the solvers."""
    x = np.linspace(lo, hi, n)
    d = P.polyval(x, P.polyder(coeffs_ascending))
    s = np.sign(d)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def test_equilibria_count_matches_brute_force():
    rng = np.random.default_rng(13)
    checked = 0
    while checked < 100:
        model = _random_model(rng)
        alpha = rng.uniform(-3, 3)
        eq = find_equilibria(model, alpha)
        if any(e.kind is Kind.DEGENERATE for e in eq.equilibria):
            continue
        if eq.locations and min(np.diff(eq.locations), default=1.0) < 1e-3:
            continue
        assert len(eq) == _brute_root_count(model.coefficients_at(alpha))
        checked += 1


def test_equilibrium_count_invariant_under_shift():
    rng = np.random.default_rng(14)
    for _ in range(100):
        deg = int(rng.integers(2, 7))
        c = rng.uniform(-1, 1, deg + 1)
        d = rng.uniform(-1, 1, deg + 1)
        c[deg], d[deg] = rng.choice([-1, 1]) * rng.uniform(0.5, 1.0), 0.0
        shift = rng.uniform(-2, 2)
        sub = np.array([shift, 1.0])  # x -> x + shift
        cs = _compose(c, sub)
        ds = _compose(d, sub)
        orig = PotentialModel.custom(np.ravel(np.column_stack([c, d])))
        moved = PotentialModel.custom(np.ravel(np.column_stack([cs, ds])))
        alpha = rng.uniform(-2, 2)
        e1, e2 = find_equilibria(orig, alpha), find_equilibria(moved, alpha)
        assert len(e1) == len(e2)
        assert np.allclose(np.array(e2.locations) + shift, e1.locations, atol=1e-6)


def _compose(coeffs, inner):
    out = np.zeros(1)
    for ck in coeffs[::-1]:
        out = P.polyadd(P.polymul(out, inner), [ck])
    out = np.pad(out, (0, len(coeffs) - len(out)))
    return out[: len(coeffs)]


def test_critical_threshold_fold():
    ct = find_critical_threshold(FOLD, (-1.0, 1.0))
    assert abs(ct.alpha_c) <= 1e-9
    lo, hi = ct.bracket
    assert hi - lo <= 1e-9 * (1 + abs(ct.alpha_c))
    assert find_equilibria(FOLD, lo).stable_count != find_equilibria(FOLD, hi).stable_count


def test_critical_threshold_cusp_against_scan():
    model = PotentialModel.cusp(-1, 0, 0, 1)
    # oracle: dense alpha scan of brute-force root counts of x^3 - x + alpha
    alphas = np.linspace(0.0, 1.0, 2001)
    counts = [_brute_root_count(model.coefficients_at(a), -3, 3, 20001) for a in alphas]
    jump = next(i for i in range(1, len(counts)) if counts[i] != counts[i - 1])
    scan_lo, scan_hi = alphas[jump - 1], alphas[jump]
    ct = find_critical_threshold(model, (0.0, 1.0))
    assert scan_lo <= ct.alpha_c <= scan_hi
    assert abs(ct.alpha_c - 2.0 / (3.0 * math.sqrt(3.0))) <= 1e-6


def test_critical_threshold_no_transition():
    with pytest.raises(NoTransitionInRange):
        find_critical_threshold(FOLD, (1.0, 2.0))


@given(st.floats(-5, 5), st.floats(0.01, 5))
@settings(max_examples=50, deadline=None)
def test_critical_bracket_invariant(center, half):
    model = PotentialModel.cusp(-1, 0, 0, 1)
    lo, hi = center - half, center + half
    try:
        ct = find_critical_threshold(model, (lo, hi))
    except NoTransitionInRange:
        return
    a, b = ct.bracket
    assert lo <= a <= b <= hi
    assert b - a <= 1e-9 * (1 + abs(ct.alpha_c))
    assert find_equilibria(model, a).stable_count != find_equilibria(model, b).stable_count


def test_branch_exponent_fold():
    assert branch_exponent_estimate(FOLD, 0.0, "Above") == pytest.approx(0.5, abs=0.01)


def test_branch_exponent_pitchfork():
    # a(alpha) = -alpha, b = 0: dV/dx = x^3 - alpha x, stable branch x = sqrt(alpha)
    model = PotentialModel.cusp(0, -1, 0, 0)
    assert branch_exponent_estimate(model, 0.0, "Above") == pytest.approx(0.5, abs=0.01)


def test_branch_exponent_no_branch_below_fold():
    with pytest.raises(NoBranchOnSide):
        branch_exponent_estimate(FOLD, 0.0, "Below")
