"""This sub command prints the closed-form sample and query budgets for
Kronecker-structured trace estimation at a given d, k and accuracy eps.
"""
import logging

from .analysis.bounds import (
    adaptive_query_lower_bound,
    all_ones_lower_bound_samples,
    gamma_assumption_samples,
    psd_sample_factor,
    rankone_variance_budget,
    wishart_mse,
)
from .exceptions import InvalidConfigError
from .interface import ScalarField
from .report import render

LOG = logging.getLogger(__name__)


def classical_samples(eps, field):
    """Samples for classical Hutchinson on a PSD matrix: ``2/ε²`` (``1/ε²`` complex)."""
    weight = 2 if ScalarField.parse(field) is ScalarField.Real else 1
    return weight / eps**2


def bounds_context(d, k, eps, field, gamma=None):
    field = ScalarField.parse(field)
    if d < 1 or k < 1:
        raise InvalidConfigError(f"d and k must be >= 1, got d={d} k={k}")
    if eps <= 0:
        raise InvalidConfigError(f"eps must be positive, got {eps}")
    if gamma is not None and gamma < 0:
        raise InvalidConfigError(f"gamma must be non-negative, got {gamma}")
    adaptive = None
    if eps < 0.5:
        adaptive = adaptive_query_lower_bound(k, eps)
    psd_factor = psd_sample_factor(k, field)
    return {
        "d": d,
        "k": k,
        "eps": eps,
        "field": field,
        "all_ones": all_ones_lower_bound_samples(d, k, eps, field),
        "psd_factor": psd_factor,
        "psd_samples": psd_factor / eps**2,
        "rank_one": rankone_variance_budget(d, k, eps, field),
        "gamma": gamma,
        "gamma_samples": (
            None if gamma is None else gamma_assumption_samples(k, eps, gamma, field)
        ),
        "adaptive": adaptive,
        "classical": classical_samples(eps, field),
        "wishart": [(q, wishart_mse(d, k, q)) for q in range(d + 1)],
    }


def bounds(args):
    context = bounds_context(args.d, args.k, args.eps, args.field, args.gamma)
    LOG.debug("Bounds context: %s", context)
    print(render("bounds.txt", **context), end="")


def setup_subparser(subparsers, parents):
    # see docstring of this file
    parser = subparsers.add_parser("bounds", description=__doc__, parents=parents)
    parser.set_defaults(command=bounds)
    parser.add_argument("--d", type=int, default=2, help="Subsystem dimension.")
    parser.add_argument("--k", type=int, default=2, help="Number of subsystems.")
    parser.add_argument("--eps", type=float, default=0.1, help="Relative accuracy.")
    parser.add_argument(
        "--field",
        type=ScalarField.parse,
        default=ScalarField.Real,
        help="Scalar field of the queries (real or complex).",
    )
    parser.add_argument(
        "--gamma",
        type=float,
        default=None,
        help="Report the budget for Kronecker PSD factors with ||A_i||_F <= gamma tr(A_i).",
    )
