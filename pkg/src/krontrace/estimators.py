"""Kronecker-Hutchinson trace estimation and exact trace recovery.

Sample ``j`` of any estimator draws its factors from stream ``j`` of the
caller's seed, so a run's output depends only on the seed and the sample
count, never on chunking or evaluation order.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import DegenerateQueryError, DimensionError, InternalError
from .interface import QueryDistribution, ScalarField
from .operators.dims import Budgets
from .operators.kron import (
    KronQueryVector,
    expand_factors_batch,
    expand_query,
    standard_basis_query,
)

LOG = logging.getLogger(__name__)

SQRT_HALF = np.sqrt(0.5)
DEGENERATE_RTOL = 1e-12
# entries of the (n, D) response block evaluated at once
CHUNK_ENTRIES = 1 << 22


def _draw_real(generator, is_gaussian, shape):
    if is_gaussian:
        return generator.standard_normal(shape)
    return generator.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0


def draw_entries(dist, generator, shape):
    """I.i.d. entries of ``dist``; complex entries are ``(r + i m)/√2``."""
    real = _draw_real(generator, dist.is_gaussian, shape)
    if dist.field is ScalarField.Real:
        return real
    imag = _draw_real(generator, dist.is_gaussian, shape)
    return (real + 1j * imag) * SQRT_HALF


def draw_factors(dist, dims, generator):
    return draw_entries(dist, generator, (dims.k, dims.d))


def sample_query(dist, dims, rng):
    return KronQueryVector(dims, draw_factors(dist, dims, rng.generator()))


def sample_factors_batch(dist, dims, rng, start, stop):
    """Factors of samples ``start..stop-1``, sample ``j`` drawn from stream ``j``."""
    dtype = np.complex128 if dist.field is ScalarField.Complex else np.float64
    factors = np.empty((stop - start, dims.k, dims.d), dtype=dtype)
    for row, j in enumerate(range(start, stop)):
        factors[row] = draw_factors(dist, dims, rng.substream(j).generator())
    return factors


def quadratic_form(operator, query):
    """``x^H A x`` for one query (``x^T A x`` when real); consumes one oracle query."""
    response = operator.apply(query)
    value = np.vdot(expand_query(query), response)
    if np.iscomplexobj(value) and query.field is ScalarField.Complex:
        return complex(value)
    return float(np.real(value))


def quadratic_forms_batch(operator, factors):
    responses = operator.apply_batch(factors)
    return np.einsum("nd,nd->n", expand_factors_batch(factors).conj(), responses)


def chunk_size(dims):
    return max(1, CHUNK_ENTRIES // dims.D)


def sample_quadratic_forms(operator, dist, count, rng):
    """Quadratic forms of samples ``0..count-1`` in index order (``count`` queries)."""
    step = chunk_size(operator.dims)
    chunks = []
    for start in range(0, count, step):
        stop = min(count, start + step)
        factors = sample_factors_batch(dist, operator.dims, rng, start, stop)
        chunks.append(quadratic_forms_batch(operator, factors))
        LOG.debug("Evaluated samples %d..%d of %d", start, stop - 1, count)
    return np.concatenate(chunks)


@dataclass
class TraceEstimate:
    value: float
    num_samples: int
    queries_used: int
    per_sample: Optional[np.ndarray] = None
    imag_max: float = 0.0
    abs_value: Optional[float] = None

    @classmethod
    def from_samples(cls, samples, keep_samples=True):
        samples = np.asarray(samples)
        mean = samples.sum() / samples.size
        per_sample = np.real(samples).astype(np.float64)
        return cls(
            value=float(np.real(mean)),
            num_samples=int(samples.size),
            queries_used=int(samples.size),
            per_sample=per_sample if keep_samples else None,
            imag_max=float(np.max(np.abs(np.imag(samples)))) if samples.size else 0.0,
            abs_value=float(np.abs(mean)),
        )


def kron_hutchinson(operator, dist, ell, rng, keep_samples=True):
    """``H_ℓ(A)``: the mean of ``ℓ`` Kronecker-structured quadratic forms."""
    dist = QueryDistribution.parse(dist)
    if ell < 1:
        raise ValueError(f"Sample count must be >= 1, got {ell}")
    samples = sample_quadratic_forms(operator, dist, ell, rng)
    estimate = TraceEstimate.from_samples(samples, keep_samples)
    LOG.debug(
        "Hutchinson %s with %d samples on %r: %.17g",
        dist.value,
        ell,
        operator,
        estimate.value,
    )
    return estimate


def median_of_means(operator, dist, ell, groups, rng):
    """Median of ``groups`` independent ``H_ℓ`` means over streams ``0..ℓ·groups-1``."""
    dist = QueryDistribution.parse(dist)
    if ell < 1 or groups < 1:
        raise ValueError("Sample count and group count must both be >= 1")
    samples = sample_quadratic_forms(operator, dist, ell * groups, rng)
    means = np.real(samples).reshape(groups, ell).sum(axis=1) / ell
    return TraceEstimate(
        value=float(np.median(means)),
        num_samples=ell * groups,
        queries_used=ell * groups,
        per_sample=means,
        imag_max=float(np.max(np.abs(np.imag(samples)))),
        abs_value=float(abs(np.median(means))),
    )


def rank_one_exact_trace(operator, rng):
    """``‖Ax‖² / x^T A x`` from a single Gaussian query; exact when ``A = gg^T``."""
    query = sample_query(QueryDistribution.RealGaussian, operator.dims, rng)
    x = expand_query(query)
    response = operator.apply(query)
    denominator = float(np.real(np.vdot(x, response)))
    scale = np.linalg.norm(response) * np.linalg.norm(x)
    if abs(denominator) < DEGENERATE_RTOL * scale or scale == 0:
        raise DegenerateQueryError(
            f"Query is orthogonal to the operator's range (x^T A x = {denominator:g})"
        )
    return float(np.real(np.vdot(response, response))) / denominator


class KronRecovery(NamedTuple):
    factors: list
    queries_used: int
    gamma: float

    @property
    def trace(self):
        return factor_product_trace(self.factors)


def factor_product_trace(factors):
    return float(np.prod([np.real(np.trace(f)) for f in factors]))


def exact_kron_recovery(operator, rng):
    """Recover ``B_1 ⊗ ... ⊗ B_k = A`` with exactly ``kd + 1`` queries.

    Only ``B_1`` absorbs the scale ``γ^{-(k-1)}``, which stays real for a
    negative ``γ``. A near-zero ``γ`` ends the run after one query with zero
    factors.
    """
    dims = operator.dims
    start = operator.query_count
    base = sample_query(QueryDistribution.RealGaussian, dims, rng)
    x_bar = expand_query(base)
    y_bar = operator.apply(base)
    gamma = float(np.real(x_bar @ y_bar))
    if abs(gamma) <= DEGENERATE_RTOL * np.linalg.norm(y_bar) * np.linalg.norm(x_bar):
        LOG.warning("γ = %g is numerically zero; returning zero factors", gamma)
        zeros = [np.zeros((dims.d, dims.d)) for _ in range(dims.k)]
        return KronRecovery(zeros, operator.query_count - start, 0.0)

    # query (i, m) replaces factor i of the base query with e_m
    batch = np.repeat(base.factors[None, :, :], dims.k * dims.d, axis=0)
    for i in range(dims.k):
        for m in range(dims.d):
            batch[i * dims.d + m, i, :] = 0.0
            batch[i * dims.d + m, i, m] = 1.0
    responses = operator.apply_batch(batch).reshape(dims.k, dims.d, dims.D)
    expanded = expand_factors_batch(batch).reshape(dims.k, dims.d, dims.D)

    factors = [np.real(expanded[i] @ responses[i].T) for i in range(dims.k)]
    factors[0] = factors[0] / gamma ** (dims.k - 1)
    queries = operator.query_count - start
    expected = dims.k * dims.d + 1
    if queries != expected:
        raise InternalError(f"Kronecker recovery spent {queries} queries, expected {expected}")
    LOG.debug("Recovered %d factors with %d queries (γ = %g)", dims.k, queries, gamma)
    return KronRecovery(factors, queries, gamma)


def diagonal_trace(operator):
    """Exact trace from the ``D`` standard-basis queries."""
    dims = operator.dims
    step = chunk_size(dims)
    total = 0.0
    for start in range(0, dims.D, step):
        stop = min(dims.D, start + step)
        factors = np.stack(
            [standard_basis_query(index, dims).factors for index in range(start, stop)]
        )
        responses = operator.apply_batch(factors)
        total += np.sum(responses[np.arange(stop - start), np.arange(start, stop)])
    return total.real.item() if np.iscomplexobj(total) else float(total)


def simulate_complex_query(operator, query, budgets=None):
    """``A x`` for complex ``x`` from the ``2^k`` real queries of its expansion.

    Each factor splits as ``r_i + i m_i``; the pattern that takes ``m`` on
    ``p`` subsystems contributes with weight ``i^p``.
    """
    dims = operator.dims
    if query.dims != dims:
        raise DimensionError(f"Query dims {query.dims} do not match {dims}")
    budgets = budgets or Budgets.from_env()
    budgets.check_subsets(dims.k)
    parts = np.stack([query.factors.real, query.factors.imag])
    patterns = np.arange(1 << dims.k)
    # bit i of a pattern selects the imaginary part of factor i
    selectors = (patterns[:, None] >> np.arange(dims.k)[None, :]) & 1
    batch = parts[selectors, np.arange(dims.k)[None, :], :]
    responses = operator.apply_batch(batch)
    weights = np.array([1, 1j, -1, -1j])[selectors.sum(axis=1) % 4]
    return weights @ responses, batch.shape[0]
