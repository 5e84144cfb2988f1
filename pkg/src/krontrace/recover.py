"""This sub command recovers the Kronecker factors of a matrix that is a
single Kronecker product, using exactly kd+1 Kronecker-structured queries.

The recovered factors' trace product is the exact trace. Matrices that are
not a Kronecker product give factors without that guarantee. With --config
the d, k, matrix and seed come from a JSON experiment config and the flags
are ignored.
"""
import json
import logging
from argparse import FileType
from dataclasses import replace

from .estimators import exact_kron_recovery
from .experiment import ExperimentConfig, MatrixSpec, build_operator
from .interface import RunMode
from .operators.matrix_io import write_kron_factors
from .rng import RngStream

LOG = logging.getLogger(__name__)


def _recovery_config(args):
    if args.config is not None:
        with args.config as f:
            return replace(ExperimentConfig.load(f), mode=RunMode.recovery)
    return ExperimentConfig(
        d=args.d,
        k=args.k,
        matrix=MatrixSpec.parse(args.matrix),
        seed=args.seed,
        mode=RunMode.recovery,
    )


def recover(args):
    cfg = _recovery_config(args)
    operator = build_operator(cfg)
    result = exact_kron_recovery(operator, RngStream(cfg.seed))
    LOG.info("Recovery used %d queries", result.queries_used)
    if args.out:
        write_kron_factors(args.out, result.factors)
        LOG.info("Wrote %d factors to %s", len(result.factors), args.out)
    document = {
        "matrix": str(cfg.matrix),
        "trace": result.trace,
        "trace_true": operator.factor_trace(),
        "gamma": result.gamma,
        "queries_used": result.queries_used,
        "factors": [factor.tolist() for factor in result.factors],
    }
    print(json.dumps(document, indent=2))


def setup_subparser(subparsers, parents):
    # see docstring of this file
    parser = subparsers.add_parser("recover", description=__doc__, parents=parents)
    parser.set_defaults(command=recover)
    parser.add_argument("--d", type=int, default=2, help="Subsystem dimension.")
    parser.add_argument("--k", type=int, default=2, help="Number of subsystems.")
    parser.add_argument(
        "--matrix",
        default="wishart_seed:0",
        help="Matrix spec, e.g. kron_factors_file:<path> or wishart_seed:<seed>.",
    )
    parser.add_argument("--seed", type=int, default=0, help="Seed of the base query.")
    parser.add_argument("--out", default=None, help="Write the factors to this file.")
    parser.add_argument(
        "--config",
        type=FileType("r", encoding="utf-8"),
        default=None,
        help="JSON experiment config; replaces --d, --k, --matrix and --seed.",
    )
