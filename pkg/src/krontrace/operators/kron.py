"""Kronecker algebra and the Kronecker-matrix-vector oracle.

Flattening convention: subsystem 1 is the leftmost Kronecker factor and the
most significant base-``d`` digit of a global index. Every other module
inherits this convention.
"""
import logging
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import reduce

import numpy as np

from ..exceptions import DimensionError
from ..interface import ScalarField
from ..rng import RngStream
from .dims import Dims, index_digits

LOG = logging.getLogger(__name__)


def field_of(array):
    return ScalarField.Complex if np.iscomplexobj(array) else ScalarField.Real


def as_dense_matrix(matrix, dims=None):
    """Coerce to a square float/complex ndarray, optionally checking ``d^k``."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {matrix.shape}")
    matrix = matrix.astype(np.complex128 if np.iscomplexobj(matrix) else np.float64)
    if dims is not None:
        dims.check_side(matrix.shape[0])
    return matrix


@dataclass(frozen=True)
class KronQueryVector:
    """A query ``x_1 ⊗ ... ⊗ x_k`` stored as its ``k`` factors, shape ``(k, d)``."""

    dims: Dims
    factors: np.ndarray

    def __post_init__(self):
        factors = np.asarray(self.factors)
        if factors.ndim != 2:
            factors = np.array([np.asarray(f) for f in self.factors])
        if factors.shape != (self.dims.k, self.dims.d):
            raise DimensionError(
                f"Query factors have shape {factors.shape}, expected"
                f" ({self.dims.k}, {self.dims.d})"
            )
        dtype = np.complex128 if np.iscomplexobj(factors) else np.float64
        object.__setattr__(self, "factors", factors.astype(dtype))

    @classmethod
    def from_factors(cls, factors, max_dimension=None):
        factors = [np.asarray(f) for f in factors]
        if not factors or len({f.shape for f in factors}) != 1 or factors[0].ndim != 1:
            raise DimensionError("All query factors must be vectors of the same length")
        factors = np.stack(factors)
        k, d = factors.shape
        return cls(Dims(d, k, max_dimension), factors)

    @property
    def field(self):
        return field_of(self.factors)


def expand_query(query):
    """Coordinates of ``x_1 ⊗ ... ⊗ x_k``; subsystem 1 is most significant."""
    return reduce(np.kron, query.factors)


def expand_factors_batch(factors):
    """Batched :func:`expand_query` over an ``(n, k, d)`` array, returns ``(n, d^k)``."""
    factors = np.asarray(factors)
    n = factors.shape[0]
    out = factors[:, 0, :]
    for i in range(1, factors.shape[1]):
        out = (out[:, :, None] * factors[:, i, None, :]).reshape(n, -1)
    return out


def standard_basis_query(index, dims):
    factors = np.zeros((dims.k, dims.d))
    for i, digit in enumerate(index_digits(index, dims)):
        factors[i, digit] = 1.0
    return KronQueryVector(dims, factors)


def _check_factor_list(factors):
    factors = [as_dense_matrix(f) for f in factors]
    if not factors:
        raise DimensionError("At least one Kronecker factor is required")
    sides = {f.shape[0] for f in factors}
    if len(sides) != 1:
        raise DimensionError(f"Heterogeneous factor sizes are not supported: {sides}")
    return factors


def mixed_product(factors_a, factors_b):
    """Factors of ``(⊗A_i)(⊗B_i)`` via the mixed-product property."""
    factors_a = _check_factor_list(factors_a)
    factors_b = _check_factor_list(factors_b)
    if len(factors_a) != len(factors_b):
        raise DimensionError(
            f"Factor counts differ: {len(factors_a)} vs {len(factors_b)}"
        )
    products = []
    for a, b in zip(factors_a, factors_b):
        if a.shape != b.shape:
            raise DimensionError(f"Factor shapes differ: {a.shape} vs {b.shape}")
        products.append(a @ b)
    return KronFactorsOperator(products)


class KronOperator(ABC):
    """A matrix reachable only through Kronecker-structured products.

    Every :meth:`apply` (and every row of :meth:`apply_batch`) is one oracle
    query. The counter is guarded by a lock so concurrent probing of one
    instance still yields an exact count.
    """

    KIND = None

    def __init__(self, dims):
        self.dims = dims
        self._query_count = 0
        self._lock = threading.Lock()

    @property
    def field(self):
        return ScalarField.Real

    @property
    def query_count(self):
        return self._query_count

    def reset_query_count(self):
        with self._lock:
            self._query_count = 0

    def _count(self, n):
        with self._lock:
            self._query_count += n

    def apply(self, query):
        if query.dims != self.dims:
            raise DimensionError(
                f"Query dims {query.dims} do not match operator dims {self.dims}"
            )
        response = self._apply_batch(query.factors[None, :, :])[0]
        self._count(1)
        return response

    def apply_batch(self, factors):
        """Apply to ``n`` queries given as an ``(n, k, d)`` factor array."""
        factors = np.asarray(factors)
        expected = (self.dims.k, self.dims.d)
        if factors.ndim != 3 or factors.shape[1:] != expected:
            raise DimensionError(
                f"Batched factors have shape {factors.shape}, expected (n, *{expected})"
            )
        responses = self._apply_batch(factors)
        self._count(factors.shape[0])
        return responses

    @abstractmethod
    def _apply_batch(self, factors):
        pass

    @abstractmethod
    def materialize(self):
        pass

    def factor_trace(self):
        """Exact trace from the representation, or ``None`` if it needs queries."""
        return None

    def __repr__(self):
        return f"{type(self).__name__}(d={self.dims.d}, k={self.dims.k})"


class ExplicitDenseOperator(KronOperator):
    KIND = "ExplicitDense"

    def __init__(self, matrix, dims):
        matrix = as_dense_matrix(matrix, dims)
        super().__init__(dims)
        self._matrix = matrix
        self._matrix.setflags(write=False)

    @property
    def field(self):
        return field_of(self._matrix)

    def _apply_batch(self, factors):
        return expand_factors_batch(factors) @ self._matrix.T

    def materialize(self):
        return self._matrix.copy()


class KronFactorsOperator(KronOperator):
    KIND = "KronFactors"

    def __init__(self, factors, max_dimension=None):
        factors = _check_factor_list(factors)
        super().__init__(Dims(factors[0].shape[0], len(factors), max_dimension))
        for factor in factors:
            factor.setflags(write=False)
        self.factors = tuple(factors)

    def _apply_batch(self, factors):
        # ⊗(A_i x_i): one d×d matvec per subsystem, never the d^k×d^k matrix
        per_factor = np.stack(
            [factors[:, i, :] @ a.T for i, a in enumerate(self.factors)], axis=1
        )
        return expand_factors_batch(per_factor)

    def materialize(self):
        return reduce(np.kron, self.factors)

    def factor_trace(self):
        return float(np.prod([np.trace(f) for f in self.factors]))


class SumOfKronOperator(KronOperator):
    KIND = "SumOfKron"

    def __init__(self, terms, max_dimension=None):
        terms = [
            t if isinstance(t, KronFactorsOperator) else KronFactorsOperator(t, max_dimension)
            for t in terms
        ]
        if not terms:
            raise DimensionError("A sum of Kronecker products needs at least one term")
        dims = terms[0].dims
        for term in terms[1:]:
            if term.dims != dims:
                raise DimensionError(f"Term dims {term.dims} differ from {dims}")
        super().__init__(dims)
        self.terms = tuple(terms)

    def _apply_batch(self, factors):
        # pylint: disable=protected-access
        return sum(term._apply_batch(factors) for term in self.terms)

    def materialize(self):
        return sum(term.materialize() for term in self.terms)

    def factor_trace(self):
        return float(sum(term.factor_trace() for term in self.terms))


class RankOneOperator(KronOperator):
    KIND = "RankOne"

    def __init__(self, vector, dims):
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1:
            raise DimensionError("Rank-one generator must be a vector")
        dims.check_side(vector.shape[0])
        super().__init__(dims)
        vector.setflags(write=False)
        self.vector = vector

    def _apply_batch(self, factors):
        projections = expand_factors_batch(factors) @ self.vector
        return projections[:, None] * self.vector[None, :]

    def materialize(self):
        return np.outer(self.vector, self.vector)

    def factor_trace(self):
        return float(self.vector @ self.vector)


class AllOnesOperator(KronOperator):
    KIND = "AllOnes"

    def _apply_batch(self, factors):
        # e^T x = Π_i e^T x_i
        sums = np.prod(factors.sum(axis=2), axis=1)
        return sums[:, None] * np.ones(self.dims.D)[None, :]

    def materialize(self):
        return np.ones((self.dims.D, self.dims.D))

    def factor_trace(self):
        return float(self.dims.D)


def wishart_factors(dims, seed):
    """``G_i^T G_i`` with ``G_i`` standard normal from stream ``i`` of ``seed``."""
    factors = []
    for i in range(dims.k):
        gaussian = RngStream(seed, i).generator().standard_normal((dims.d, dims.d))
        factors.append(gaussian.T @ gaussian)
    return factors


class WishartKronOperator(KronFactorsOperator):
    KIND = "WishartKronSeed"

    def __init__(self, dims, seed):
        super().__init__(wishart_factors(dims, seed), dims.max_dimension)
        self.seed = seed


def materialize(operator):
    return operator.materialize()


def apply(operator, query):
    return operator.apply(query)
