"""Exact single-sample variance of the Kronecker-Hutchinson estimator.

Real queries: ``Var = Σ_{S⊊[k]} 2^{k-|S|} ‖tr_S(Ā)‖_F²`` where ``Ā`` averages
the ``2^k`` partial transposes. Complex queries report ``Re(x^H A x)``, which
is ``x^H Â x`` for the Hermitian part ``Â = (A + A^H)/2``, and have
``Var = Σ_{S⊊[k]} ‖tr_S(Â)‖_F²``. Both are equalities for Gaussian factors
and upper bounds for Rademacher factors.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..interface import QueryDistribution, ScalarField
from ..operators.dims import Budgets
from ..operators.kron import as_dense_matrix
from ..subsystems import (
    SubsystemSet,
    average_partial_transposes,
    frob_norm_sq,
    is_psd,
    partial_trace,
    symmetrize,
)

LOG = logging.getLogger(__name__)

NOISE_RTOL = 1e-9


def _require_real(matrix):
    if np.iscomplexobj(matrix):
        raise ValueError("Real queries need a real matrix")


def _weight(field):
    return 2 if field is ScalarField.Real else 1


def _strict_subset_sum(matrix, dims, weight):
    total = 0.0
    for subset in SubsystemSet.all_subsets(dims.k):
        if subset.is_full():
            continue
        reduced = partial_trace(matrix, dims, subset)
        total += weight ** (dims.k - len(subset)) * frob_norm_sq(reduced)
    return total


def exact_variance(matrix, dims, field, budgets=None):
    field = ScalarField.parse(field)
    budgets = budgets or Budgets.from_env()
    budgets.check_subsets(dims.k)
    matrix = as_dense_matrix(matrix, dims)
    if field is ScalarField.Real:
        _require_real(matrix)
        base = average_partial_transposes(matrix, dims, budgets)
    else:
        base = symmetrize(matrix)
    return _strict_subset_sum(base, dims, _weight(field))


def second_moment_formula(matrix, dims, field, budgets=None):
    """``E[q²] = Var + tr(A)²``: the subset sum including ``S = [k]``."""
    trace = float(np.real(np.trace(as_dense_matrix(matrix, dims))))
    return exact_variance(matrix, dims, field, budgets) + trace**2


def variance_upper_bound_no_abar(matrix, dims, field, budgets=None):
    """The same subset sum on ``tr_S(A)``; tight when ``A = Ā``."""
    field = ScalarField.parse(field)
    budgets = budgets or Budgets.from_env()
    budgets.check_subsets(dims.k)
    matrix = as_dense_matrix(matrix, dims)
    return _strict_subset_sum(matrix, dims, _weight(field))


def psd_worst_case_bound(trace_value, k, field, statement_form=False):
    """``3^k tr(A)²`` (``2^k`` for complex) for PSD ``A``.

    ``statement_form`` gives the looser ``(3^k tr A)²``.
    """
    if trace_value < 0:
        raise ValueError(f"PSD matrices have a non-negative trace, got {trace_value}")
    base = 3 if ScalarField.parse(field) is ScalarField.Real else 2
    if statement_form:
        return float((base**k * trace_value) ** 2)
    return float(base**k * trace_value**2)


def required_samples(variance, trace_value, eps):
    """``⌈Var / (ε² tr²)⌉``, at least one sample.

    >>> required_samples(128, 4, 0.1)
    800
    """
    if trace_value == 0:
        raise ValueError("Relative accuracy is undefined for a zero trace")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    ratio = variance / (eps**2 * trace_value**2)
    return max(1, math.ceil(ratio * (1 - NOISE_RTOL)))


@dataclass(frozen=True)
class VarianceReport:
    second_moment: float
    variance: float
    upper_bound_no_abar: float
    psd_worst_case: Optional[float]
    field: ScalarField
    dist: Optional[QueryDistribution] = None
    trace: float = 0.0

    @property
    def is_exact(self):
        """``variance`` is the true variance rather than an upper bound."""
        return self.dist is None or self.dist.is_gaussian


def variance_report(matrix, dims, field, dist=None, budgets=None, statement_form=False):
    field = ScalarField.parse(field)
    if dist is not None:
        dist = QueryDistribution.parse(dist)
        field = dist.field
    matrix = as_dense_matrix(matrix, dims)
    trace = float(np.real(np.trace(matrix)))
    variance = exact_variance(matrix, dims, field, budgets)
    psd_bound = None
    if is_psd(matrix):
        psd_bound = psd_worst_case_bound(max(trace, 0.0), dims.k, field, statement_form)
    LOG.debug("Exact %s variance on d=%d k=%d: %.17g", field.value, dims.d, dims.k, variance)
    return VarianceReport(
        second_moment=variance + trace**2,
        variance=variance,
        upper_bound_no_abar=variance_upper_bound_no_abar(matrix, dims, field, budgets),
        psd_worst_case=psd_bound,
        field=field,
        dist=dist,
        trace=trace,
    )
