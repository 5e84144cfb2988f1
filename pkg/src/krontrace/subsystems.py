"""Partial traces, partial transposes and post-measurement reduced matrices.

All operations work on the ``(d,)*2k`` tensor view of a ``d^k × d^k`` matrix:
axes ``0..k-1`` are the row digits of subsystems ``1..k`` and axes ``k..2k-1``
the column digits. Tracing and transposing only relabel or contract axes.
"""
import logging
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .exceptions import DimensionError, SubsystemError
from .operators.dims import Budgets
from .operators.kron import as_dense_matrix

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubsystemSet:
    """A subset of ``{1..k}`` stored as a bitmask (bit ``i-1`` is subsystem ``i``)."""

    k: int
    members: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise SubsystemError(f"k must be >= 1, got {self.k}")
        if self.members < 0 or self.members >> self.k:
            raise SubsystemError(
                f"Bitmask {self.members:#b} selects subsystems outside 1..{self.k}"
            )

    @classmethod
    def of(cls, k, subsystems=()):
        """Build from 1-based subsystem numbers.

        >>> SubsystemSet.of(3, [1, 3]).members
        5
        """
        members = 0
        for i in subsystems:
            if not 1 <= i <= k:
                raise SubsystemError(f"Subsystem {i} is not in 1..{k}")
            members |= 1 << (i - 1)
        return cls(k, members)

    @classmethod
    def parse(cls, k, text):
        """Parse a comma separated list such as ``"1,3"``; empty means no subsystems.

        >>> list(SubsystemSet.parse(3, "3, 1"))
        [1, 3]
        """
        items = [item.strip() for item in text.split(",") if item.strip()]
        try:
            return cls.of(k, [int(item) for item in items])
        except ValueError as e:
            raise SubsystemError(f"Cannot parse subsystem list '{text}'") from e

    @classmethod
    def coerce(cls, k, value):
        if isinstance(value, SubsystemSet):
            if value.k != k:
                raise SubsystemError(f"Subsystem set is for k={value.k}, expected {k}")
            return value
        return cls.of(k, value)

    @classmethod
    def full(cls, k):
        return cls(k, (1 << k) - 1)

    @classmethod
    def all_subsets(cls, k):
        """Every subset of ``{1..k}``, in bitmask order."""
        for members in range(1 << k):
            yield cls(k, members)

    def is_full(self):
        return self.members == (1 << self.k) - 1

    def complement(self):
        return SubsystemSet(self.k, ((1 << self.k) - 1) & ~self.members)

    def union(self, other):
        return SubsystemSet(self.k, self.members | other.members)

    def __contains__(self, i):
        return 1 <= i <= self.k and bool(self.members >> (i - 1) & 1)

    def __iter__(self):
        return (i for i in range(1, self.k + 1) if i in self)

    def __len__(self):
        return bin(self.members).count("1")

    def __str__(self):
        return "{" + ",".join(str(i) for i in self) + "}"


@dataclass(frozen=True)
class PmrdmPrefix:
    """The first ``i`` factor vectors of a Kronecker query (``i = 0`` is empty)."""

    factors: tuple = ()

    @property
    def i(self):
        return len(self.factors)


def _tensor_view(matrix, dims):
    matrix = as_dense_matrix(matrix, dims)
    return matrix.reshape((dims.d,) * (2 * dims.k))


def partial_trace(matrix, dims, subsystems):
    """``tr_S(A)``; survivors keep their relative order and are renumbered 1..k-|S|."""
    traced = SubsystemSet.coerce(dims.k, subsystems)
    tensor = _tensor_view(matrix, dims)
    k = dims.k
    rows = list(range(k))
    cols = [i if (i + 1) in traced else k + i for i in range(k)]
    survivors = [i for i in range(k) if (i + 1) not in traced]
    out = survivors + [k + i for i in survivors]
    reduced = np.einsum(tensor, rows + cols, out)
    side = dims.d ** len(survivors)
    return np.asarray(reduced).reshape(side, side)


def partial_transpose(matrix, dims, subsystems):
    """``A^{T_V}``: swap row and column digits on every subsystem in ``V``."""
    transposed = SubsystemSet.coerce(dims.k, subsystems)
    tensor = _tensor_view(matrix, dims)
    k = dims.k
    axes = list(range(2 * k))
    for i in transposed:
        axes[i - 1], axes[k + i - 1] = axes[k + i - 1], axes[i - 1]
    return np.transpose(tensor, axes).reshape(dims.D, dims.D)


def average_partial_transposes(matrix, dims, budgets=None):
    """``Ā = 2^{-k} Σ_V A^{T_V}`` by direct enumeration of all ``2^k`` subsets."""
    budgets = budgets or Budgets.from_env()
    budgets.check_subsets(dims.k)
    matrix = as_dense_matrix(matrix, dims)
    total = np.zeros_like(matrix)
    for subset in SubsystemSet.all_subsets(dims.k):
        total += partial_transpose(matrix, dims, subset)
    return total / 2**dims.k


def pmrdm(matrix, dims, prefix):
    """``(x_{:i} ⊗ I)^T A (x_{:i} ⊗ I)``, a matrix of side ``d^(k-i)``."""
    if not isinstance(prefix, PmrdmPrefix):
        prefix = PmrdmPrefix(tuple(prefix))
    matrix = as_dense_matrix(matrix, dims)
    if prefix.i > dims.k:
        raise SubsystemError(f"Prefix length {prefix.i} exceeds k = {dims.k}")
    if prefix.i == 0:
        return matrix
    factors = [np.asarray(f) for f in prefix.factors]
    for factor in factors:
        if factor.shape != (dims.d,):
            raise DimensionError(
                f"Prefix factor has shape {factor.shape}, expected ({dims.d},)"
            )
    measured = reduce(np.kron, factors)
    rest = dims.d ** (dims.k - prefix.i)
    blocks = matrix.reshape(measured.size, rest, measured.size, rest)
    return np.einsum("a,arbs,b->rs", measured, blocks, measured)


def frob_norm_sq(matrix):
    return float(np.sum(np.abs(np.asarray(matrix)) ** 2))


def symmetrize(matrix):
    """``(A + A^T)/2``; conjugate transpose for complex input."""
    matrix = np.asarray(matrix)
    return (matrix + matrix.conj().T) / 2


def min_symmetric_eigenvalue(matrix):
    return float(np.linalg.eigvalsh(symmetrize(matrix))[0])


def is_psd(matrix, rtol=1e-10):
    """PSD test with a floor relative to ``‖A‖_F``."""
    scale = np.sqrt(frob_norm_sq(matrix))
    return min_symmetric_eigenvalue(matrix) >= -rtol * max(scale, 1.0)
