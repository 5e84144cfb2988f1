# pylint: disable=protected-access
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.strategies import integers, sampled_from

from krontrace.exceptions import DimensionError
from krontrace.interface import ScalarField
from krontrace.operators import (
    AllOnesOperator,
    ExplicitDenseOperator,
    KronFactorsOperator,
    KronQueryVector,
    RankOneOperator,
    SumOfKronOperator,
    WishartKronOperator,
    apply,
    expand_query,
    materialize,
    mixed_product,
)
from krontrace.operators.kron import (
    as_dense_matrix,
    expand_factors_batch,
    standard_basis_query,
    wishart_factors,
)

from ..utils import dims, kron_all

A1 = np.array([[1.0, 0.0], [0.0, 2.0]])
A2 = np.array([[3.0, 1.0], [1.0, 3.0]])


def query(*factors):
    return KronQueryVector.from_factors(factors, 4096)


@pytest.mark.parametrize(
    "factors,expected",
    [
        (((3, 5),), (3, 5)),
        (((1, 2), (1, 1)), (1, 1, 2, 2)),
        (((1, 2), (3, 4)), (3, 4, 6, 8)),
    ],
)
def test_expand_query(factors, expected):
    np.testing.assert_array_equal(expand_query(query(*factors)), expected)


def test_query_rejects_ragged_factors():
    with pytest.raises(DimensionError):
        KronQueryVector.from_factors([(1, 2), (1, 2, 3)])


def test_query_rejects_wrong_shape():
    with pytest.raises(DimensionError):
        KronQueryVector(dims(2, 2), np.ones((3, 2)))


def test_query_field():
    assert query((1, 2)).field is ScalarField.Real
    assert query((1, 1j)).field is ScalarField.Complex


def test_expand_factors_batch_matches_single():
    rng = np.random.default_rng(0)
    factors = rng.standard_normal((5, 3, 2))
    batch = expand_factors_batch(factors)
    for row, single in zip(batch, factors):
        np.testing.assert_allclose(row, kron_all(*single))


def test_as_dense_matrix_rejects_non_square():
    with pytest.raises(DimensionError):
        as_dense_matrix(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        as_dense_matrix(np.ones((3, 3)), dims(2, 2))


def test_materialize_all_ones():
    np.testing.assert_array_equal(materialize(AllOnesOperator(dims(2, 1))), np.ones((2, 2)))


def test_materialize_kron_factors():
    expected = [[3, 1, 0, 0], [1, 3, 0, 0], [0, 0, 6, 2], [0, 0, 2, 6]]
    np.testing.assert_array_equal(KronFactorsOperator([A1, A2]).materialize(), expected)


def test_materialize_rank_one():
    matrix = RankOneOperator(np.array([1.0, 1.0, 2.0, 2.0]), dims(2, 2)).materialize()
    assert matrix[3, 0] == 2
    assert matrix[3, 3] == 4


def test_apply_identity_is_expand():
    operator = KronFactorsOperator([np.eye(2), np.eye(2)])
    q = query((1.5, -2), (0.5, 3))
    np.testing.assert_allclose(apply(operator, q), expand_query(q))


def test_apply_kron_factors():
    response = KronFactorsOperator([A1, A2]).apply(query((1, 0), (1, 0)))
    np.testing.assert_array_equal(response, (3, 1, 0, 0))


def test_apply_all_ones():
    response = AllOnesOperator(dims(2, 2)).apply(query((1, 1), (1, 1)))
    np.testing.assert_array_equal(response, (4, 4, 4, 4))


def test_apply_rejects_mismatched_dims():
    with pytest.raises(DimensionError):
        AllOnesOperator(dims(2, 2)).apply(query((1, 1)))


def test_apply_batch_rejects_bad_shape():
    with pytest.raises(DimensionError):
        AllOnesOperator(dims(2, 2)).apply_batch(np.ones((3, 2)))


def test_query_count_per_apply():
    operator = AllOnesOperator(dims(2, 2))
    for _ in range(7):
        operator.apply(query((1, 1), (1, -1)))
    operator.apply_batch(np.ones((5, 2, 2)))
    assert operator.query_count == 12
    operator.reset_query_count()
    assert operator.query_count == 0


def test_query_count_is_thread_safe():
    operator = AllOnesOperator(dims(2, 2))
    q = query((1, 1), (1, 1))

    def apply_queries():
        for _ in range(200):
            operator.apply(q)

    threads = [threading.Thread(target=apply_queries) for _ in range(4)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert operator.query_count == 800


def test_dense_operator_is_read_only():
    matrix = np.eye(4)
    operator = ExplicitDenseOperator(matrix, dims(2, 2))
    operator.apply(query((1, 2), (3, 4)))
    copy = operator.materialize()
    copy[0, 0] = 7
    np.testing.assert_array_equal(operator.materialize(), np.eye(4))


def test_dense_operator_field():
    assert ExplicitDenseOperator(np.eye(2), dims(2, 1)).field is ScalarField.Real
    assert ExplicitDenseOperator(1j * np.eye(2), dims(2, 1)).field is ScalarField.Complex


def test_kron_factors_rejects_heterogeneous():
    with pytest.raises(DimensionError):
        KronFactorsOperator([np.eye(2), np.eye(3)])
    with pytest.raises(DimensionError):
        KronFactorsOperator([])


def test_sum_of_kron():
    operator = SumOfKronOperator([[A1, A2], [A2, A1]])
    expected = np.kron(A1, A2) + np.kron(A2, A1)
    np.testing.assert_allclose(operator.materialize(), expected)
    assert operator.factor_trace() == pytest.approx(np.trace(expected))
    q = query((1, -2), (0.5, 1))
    np.testing.assert_allclose(operator.apply(q), expected @ expand_query(q))
    assert operator.query_count == 1


def test_sum_of_kron_rejects_mixed_dims():
    with pytest.raises(DimensionError):
        SumOfKronOperator([[A1, A2], [A1]])


def test_factor_traces():
    assert KronFactorsOperator([A1, A2]).factor_trace() == 18
    assert AllOnesOperator(dims(2, 2)).factor_trace() == 4
    assert RankOneOperator([1, 1, 2, 2], dims(2, 2)).factor_trace() == 10
    assert ExplicitDenseOperator(np.eye(4), dims(2, 2)).factor_trace() is None


def test_wishart_is_reproducible_and_psd():
    first = WishartKronOperator(dims(3, 2), 11).materialize()
    second = WishartKronOperator(dims(3, 2), 11).materialize()
    np.testing.assert_array_equal(first, second)
    assert np.linalg.eigvalsh(first).min() > -1e-10
    factors = wishart_factors(dims(3, 2), 11)
    assert not np.array_equal(factors[0], factors[1])


@pytest.mark.parametrize(
    "left,right,expected",
    [
        ([np.eye(2)] * 2, [A1, A2], [A1, A2]),
        ([[[0, 1], [1, 0]]], [[[0, 1], [1, 0]]], [np.eye(2)]),
        (
            [[[1, 1], [0, 1]], [[2, 0], [0, 2]]],
            [[[1, 0], [1, 1]], np.eye(2)],
            [[[2, 1], [1, 1]], [[2, 0], [0, 2]]],
        ),
    ],
)
def test_mixed_product(left, right, expected):
    product = mixed_product(left, right)
    for factor, target in zip(product.factors, expected):
        np.testing.assert_array_equal(factor, target)


def test_mixed_product_rejects_mismatch():
    with pytest.raises(DimensionError):
        mixed_product([np.eye(2)], [np.eye(2), np.eye(2)])


def test_standard_basis_query():
    q = standard_basis_query(5, dims(3, 2))
    expected = np.zeros(9)
    expected[5] = 1
    np.testing.assert_array_equal(expand_query(q), expected)


def _operators(d, k, seed):
    rng = np.random.default_rng(seed)
    factors = [rng.standard_normal((d, d)) for _ in range(k)]
    return [
        ExplicitDenseOperator(rng.standard_normal((d**k, d**k)), dims(d, k)),
        KronFactorsOperator(factors),
        SumOfKronOperator([factors, factors[::-1]]),
        RankOneOperator(rng.standard_normal(d**k), dims(d, k)),
        AllOnesOperator(dims(d, k)),
        WishartKronOperator(dims(d, k), seed),
    ]


@settings(max_examples=20, deadline=None)
@given(
    sampled_from([(2, 1), (2, 2), (3, 2), (2, 3)]),
    integers(min_value=0, max_value=2**32),
    sampled_from([False, True]),
)
def test_apply_matches_materialize(dk, seed, complex_query):
    d, k = dk
    rng = np.random.default_rng(seed)
    factors = rng.standard_normal((k, d))
    if complex_query:
        factors = factors + 1j * rng.standard_normal((k, d))
    q = KronQueryVector(dims(d, k), factors)
    for operator in _operators(d, k, seed):
        dense = operator.materialize()
        np.testing.assert_allclose(
            operator.apply(q), dense @ expand_query(q), rtol=1e-12, atol=1e-12
        )
