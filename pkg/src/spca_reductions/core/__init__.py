"""Randomness, sampling primitives, dense linear algebra and matrix I/O."""
from .linalg import as_real_matrix, haar_frame, haar_orthogonal, is_symmetric, psd_sqrt, symmetrize
from .matio import read_matrix, read_rmx1, write_matrix, write_rmx1, read_csv_matrix, write_csv_matrix
from .rng import RngStream, as_stream
from .sampling import (
    bernoulli,
    binomial,
    chi_squared,
    gaussian,
    uniform_permutation,
    uniform_subset,
)

__all__ = [
    "RngStream",
    "as_stream",
    "gaussian",
    "chi_squared",
    "bernoulli",
    "binomial",
    "uniform_subset",
    "uniform_permutation",
    "haar_frame",
    "haar_orthogonal",
    "psd_sqrt",
    "symmetrize",
    "is_symmetric",
    "as_real_matrix",
    "read_matrix",
    "write_matrix",
    "read_rmx1",
    "write_rmx1",
    "read_csv_matrix",
    "write_csv_matrix",
]
