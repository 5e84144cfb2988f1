"""Brute-force fourth-moment oracle.

Computes ``E[q]`` and ``E[q²]`` of a single quadratic form directly from the
per-subsystem moment tensors, independently of the subset-sum formulas. The
global moment tensor over ``[D]^4`` is the Kronecker product of the ``k``
per-subsystem tensors.
"""
import logging
from dataclasses import dataclass
from functools import reduce
from typing import NamedTuple

import numpy as np

from ..estimators import draw_entries
from ..interface import QueryDistribution, ScalarField
from ..operators.dims import Budgets
from ..operators.kron import as_dense_matrix
from ..subsystems import symmetrize

LOG = logging.getLogger(__name__)


def _pairing_deltas(d):
    eye = np.eye(d)
    # δab δce, δac δbe, δae δbc
    return (
        np.einsum("ab,ce->abce", eye, eye),
        np.einsum("ac,be->abce", eye, eye),
        np.einsum("ae,bc->abce", eye, eye),
    )


def _all_equal(d):
    tensor = np.zeros((d,) * 4)
    for a in range(d):
        tensor[a, a, a, a] = 1.0
    return tensor


@dataclass(frozen=True)
class MomentTensor:
    """Moments of one subsystem's query factor.

    Real: ``m4[a,b,c,e] = E[y_a y_b y_c y_e]``. Complex:
    ``m4[a,b,c,e] = E[z̄_a z_b z̄_c z_e]``. ``m2`` is the identity for all four
    distributions.
    """

    dist: QueryDistribution
    d: int

    @property
    def m2(self):
        return np.eye(self.d)

    @property
    def m4(self):
        first, second, third = _pairing_deltas(self.d)
        if self.dist is QueryDistribution.RealGaussian:
            return first + second + third
        if self.dist is QueryDistribution.RealRademacher:
            return first + second + third - 2 * _all_equal(self.d)
        if self.dist is QueryDistribution.ComplexGaussian:
            return first + third
        return first + third - _all_equal(self.d)

    def empirical_m4(self, samples, rng, chunk=50_000):
        """Monte Carlo estimate of :attr:`m4` from ``samples`` draws of one factor."""
        generator = rng.generator()
        total = np.zeros((self.d,) * 4, dtype=np.complex128)
        remaining = samples
        while remaining:
            n = min(chunk, remaining)
            draws = draw_entries(self.dist, generator, (n, self.d))
            bar = draws.conj() if self.dist.field is ScalarField.Complex else draws
            total += np.einsum("na,nb,nc,ne->abce", bar, draws, bar, draws)
            remaining -= n
        estimate = total / samples
        if self.dist.field is ScalarField.Real:
            return estimate.real
        return estimate

    def monte_carlo_deviation(self, samples, rng):
        return float(np.max(np.abs(self.empirical_m4(samples, rng) - self.m4)))


def _kron_tensor(left, right):
    combined = np.einsum("abce,fghi->afbgchei", left, right)
    side = left.shape[0] * right.shape[0]
    return combined.reshape((side,) * 4)


class OracleMoments(NamedTuple):
    mean: float
    second_moment: float

    @property
    def variance(self):
        return self.second_moment - self.mean**2


def moment_oracle(matrix, dims, dist, budgets=None):
    """``E[q]`` and ``E[q²]`` by summing over all ``d^{4k}`` index quadruples.

    ``q = x^T A x`` for real queries and ``Re(x^H A x)`` for complex ones.
    """
    dist = QueryDistribution.parse(dist)
    budgets = budgets or Budgets.from_env()
    budgets.check_oracle(dims.D**4)
    matrix = as_dense_matrix(matrix, dims)
    if dist.field is ScalarField.Complex:
        matrix = symmetrize(matrix)
    tensor = MomentTensor(dist, dims.d)
    m2 = reduce(np.kron, [tensor.m2] * dims.k)
    m4 = reduce(_kron_tensor, [tensor.m4] * dims.k)
    mean = np.einsum("ij,ij->", matrix, m2)
    second = np.einsum("ij,mn,ijmn->", matrix, matrix, m4, optimize=True)
    LOG.debug("Moment oracle %s over %d terms", dist.value, dims.D**4)
    return OracleMoments(float(np.real(mean)), float(np.real(second)))
