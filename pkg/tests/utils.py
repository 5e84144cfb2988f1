import os
from contextlib import contextmanager
from functools import reduce

import numpy as np
from hypothesis.strategies import composite, integers, sampled_from

from krontrace.operators import Dims
from krontrace.rng import RngStream

MAX_DIMENSION = 4096

# (d, k) pairs small enough for brute-force oracles
SMALL_DIMS = ((2, 1), (3, 1), (2, 2), (3, 2), (2, 3))


@contextmanager
def chdir(path):
    old = os.getcwd()
    os.chdir(path)
    yield path
    os.chdir(old)


def dims(d, k):
    return Dims(d, k, max_dimension=MAX_DIMENSION)


def kron_all(*factors):
    return reduce(np.kron, factors)


def random_matrix(d, k, seed, stream=0):
    side = d**k
    return RngStream(seed, stream).generator().standard_normal((side, side))


def random_psd(d, k, seed, stream=0):
    root = random_matrix(d, k, seed, stream)
    return root.T @ root


def random_complex(d, k, seed):
    real = random_matrix(d, k, seed, 0)
    imag = random_matrix(d, k, seed, 1)
    return real + 1j * imag


@composite
def small_dims(draw):
    d, k = draw(sampled_from(SMALL_DIMS))
    return dims(d, k)


@composite
def seeded_matrices(draw):
    """A small ``Dims`` and a seeded Gaussian matrix of matching side."""
    matrix_dims = draw(small_dims())
    seed = draw(integers(min_value=0, max_value=2**32))
    return matrix_dims, random_matrix(matrix_dims.d, matrix_dims.k, seed)
