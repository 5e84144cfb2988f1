"""Dense-matrix and Kronecker-factor files.

Binary layout: three little-endian int64 (``d``, ``k``, field tag 0=real /
1=complex) followed by row-major little-endian float64 entries, interleaved
(re, im) pairs for complex matrices. A ``.csv`` file holds the rows of a real
matrix with no header. Kronecker factor files are JSON documents
``{"factors": [[[...]], ...]}`` (a single product) or
``{"terms": [{"factors": ...}, ...]}`` (a sum of products).
"""
import json
import logging
from pathlib import Path

import numpy as np

from ..exceptions import DimensionError, MatrixFormatError
from ..interface import ScalarField
from .dims import Dims
from .kron import KronFactorsOperator, SumOfKronOperator, as_dense_matrix, field_of

LOG = logging.getLogger(__name__)

HEADER_DTYPE = np.dtype("<i8")
ENTRY_DTYPE = np.dtype("<f8")
HEADER_LENGTH = 3


def read_dense_matrix(path, k=None, max_dimension=None):
    """Load a matrix and its :class:`Dims`; CSV files need ``k`` to infer ``d``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_csv_matrix(path, k, max_dimension)
    return _read_binary_matrix(path, k, max_dimension)


def _read_csv_matrix(path, k, max_dimension):
    if k is None:
        raise MatrixFormatError(f"{path}: CSV matrices need the subsystem count k")
    try:
        matrix = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as e:
        LOG.debug("CSV matrix decode failed", exc_info=True)
        raise MatrixFormatError(f"{path}: {e}") from e
    try:
        matrix = as_dense_matrix(matrix)
        dims = Dims.from_side(matrix.shape[0], k, max_dimension)
    except DimensionError as e:
        raise MatrixFormatError(f"{path}: {e}") from e
    return matrix, dims


def _read_binary_matrix(path, k, max_dimension):
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise MatrixFormatError(f"{path}: {e}") from e
    header_size = HEADER_LENGTH * HEADER_DTYPE.itemsize
    if len(raw) < header_size:
        raise MatrixFormatError(f"{path}: truncated header")
    d, file_k, tag = (int(v) for v in np.frombuffer(raw[:header_size], HEADER_DTYPE))
    if k is not None and k != file_k:
        raise MatrixFormatError(f"{path}: file has k={file_k}, expected k={k}")
    try:
        field = ScalarField.from_tag(tag)
        dims = Dims(d, file_k, max_dimension)
    except (ValueError, DimensionError) as e:
        raise MatrixFormatError(f"{path}: {e}") from e
    entries = np.frombuffer(raw[header_size:], ENTRY_DTYPE)
    expected = dims.D**2 * (2 if field is ScalarField.Complex else 1)
    if entries.size != expected:
        raise MatrixFormatError(
            f"{path}: expected {expected} float64 entries, found {entries.size}"
        )
    if field is ScalarField.Complex:
        matrix = entries[0::2] + 1j * entries[1::2]
    else:
        matrix = entries.copy()
    return matrix.reshape(dims.D, dims.D), dims


def write_dense_matrix(path, matrix, dims):
    matrix = as_dense_matrix(matrix, dims)
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if field_of(matrix) is ScalarField.Complex:
            raise MatrixFormatError("CSV matrix files hold real matrices only")
        np.savetxt(path, matrix, delimiter=",", fmt="%.17g")
        return
    field = field_of(matrix)
    header = np.array([dims.d, dims.k, field.tag], dtype=HEADER_DTYPE)
    if field is ScalarField.Complex:
        entries = np.empty(matrix.size * 2, dtype=ENTRY_DTYPE)
        entries[0::2] = matrix.real.ravel()
        entries[1::2] = matrix.imag.ravel()
    else:
        entries = matrix.ravel().astype(ENTRY_DTYPE)
    with path.open("wb") as f:
        f.write(header.tobytes())
        f.write(entries.tobytes())


def read_kron_factors(path, max_dimension=None):
    """Load a ``KronFactorsOperator`` or ``SumOfKronOperator`` from JSON."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            document = json.load(f)
    except (OSError, ValueError) as e:
        LOG.debug("Kronecker factor file decode failed", exc_info=True)
        raise MatrixFormatError(f"{path}: {e}") from e
    try:
        if "terms" in document:
            return SumOfKronOperator(
                [np.asarray(t["factors"], dtype=np.float64) for t in document["terms"]],
                max_dimension,
            )
        return KronFactorsOperator(
            [np.asarray(f, dtype=np.float64) for f in document["factors"]],
            max_dimension,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise MatrixFormatError(f"{path}: malformed factor document ({e})") from e


def write_kron_factors(path, factors):
    document = {"factors": [np.asarray(f, dtype=np.float64).tolist() for f in factors]}
    with Path(path).open("w", encoding="utf-8") as f:
        json.dump(document, f, indent=2)
