"""Closed-form sample and query counts for Kronecker-structured trace estimation."""
import math
from typing import NamedTuple

from ..interface import ScalarField

RANK_ONE_PROOF_CONSTANT = 1152


def _check_eps(eps):
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")


def all_ones_lower_bound_samples(d, k, eps, field):
    """Samples needed on the all-ones matrix: ``((3 - 2/d)^k - 1)/ε²``.

    Complex queries give ``((2 - 1/d)^k - 1)/ε²``.
    """
    _check_eps(eps)
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if ScalarField.parse(field) is ScalarField.Real:
        growth = 3 - 2 / d
    else:
        growth = 2 - 1 / d
    return (growth**k - 1) / eps**2


def rankone_expected_partial_trace_norm(d, k, s):
    """``E‖tr_S(gg^T)‖_F² = d^k (d^{k-s} + d^s + 1)`` for Gaussian ``g`` and ``|S| = s``."""
    if not 0 <= s <= k:
        raise ValueError(f"Subset size {s} is outside 0..{k}")
    return float(d**k * (d ** (k - s) + d**s + 1))


class RankOneBudget(NamedTuple):
    leading_order: float
    proof_constant: float


def rankone_variance_budget(d, k, eps, field):
    _check_eps(eps)
    if ScalarField.parse(field) is ScalarField.Real:
        leading = (2 + 1 / d) ** k / eps**2
    else:
        leading = (1 + 1 / d) ** k / eps**2
    return RankOneBudget(leading, RANK_ONE_PROOF_CONSTANT * leading)


def wishart_mse(d, k, q):
    """MSE of the best estimate of ``Π tr(W_i)`` after ``q`` queries per factor.

    >>> wishart_mse(2, 2, 1)
    92
    """
    if not 0 <= q <= d:
        raise ValueError(f"q must lie in 0..{d}, got {q}")
    moment = d**4 + 2 * d**2
    return moment**k - (moment - 2 * (d - q) ** 2) ** k


def adaptive_query_lower_bound(k, eps):
    """``4√k / (√2 ε)``, only meaningful for ``0 < ε < 1/2``."""
    if not 0 < eps < 0.5:
        raise ValueError(f"The lower bound holds for 0 < eps < 1/2, got {eps}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 4 * math.sqrt(k) / (math.sqrt(2) * eps)


def gamma_assumption_samples(k, eps, gamma, field):
    """Samples for ``⊗A_i`` with ``‖A_i‖_F ≤ γ tr(A_i)``: ``((1 + 2γ²)^k - 1)/ε²``."""
    _check_eps(eps)
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    weight = 2 if ScalarField.parse(field) is ScalarField.Real else 1
    return ((1 + weight * gamma**2) ** k - 1) / eps**2


def psd_sample_factor(k, field):
    """``3^k`` (real) or ``2^k`` (complex): samples per ``1/ε²`` in the PSD worst case."""
    return (3 if ScalarField.parse(field) is ScalarField.Real else 2) ** k
