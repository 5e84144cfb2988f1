from .dims import Budgets, Dims, digits_index, index_digits
from .kron import (
    AllOnesOperator,
    ExplicitDenseOperator,
    KronFactorsOperator,
    KronOperator,
    KronQueryVector,
    RankOneOperator,
    SumOfKronOperator,
    WishartKronOperator,
    apply,
    expand_query,
    materialize,
    mixed_product,
)

__all__ = [
    "AllOnesOperator",
    "Budgets",
    "Dims",
    "ExplicitDenseOperator",
    "KronFactorsOperator",
    "KronOperator",
    "KronQueryVector",
    "RankOneOperator",
    "SumOfKronOperator",
    "WishartKronOperator",
    "apply",
    "digits_index",
    "expand_query",
    "index_digits",
    "materialize",
    "mixed_product",
]
