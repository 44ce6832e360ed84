"""Scalar and vector sampling primitives.

Index sets are returned 0-indexed as sorted ``int64`` arrays; text formats
convert to 1-indexed at the boundary.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidParameter
from .rng import RngStream


def gaussian(rng: RngStream, size=None):
    """Standard normal draw(s)."""
    return rng.normal(size)


def chi_squared(dof: int, rng: RngStream, size=None):
    """Chi-square draw(s) with ``dof`` degrees of freedom.

    Computed as the sum of ``dof`` squared standard normals; no gamma-sampler
    shortcut.
    """
    dof = int(dof)
    if dof < 1:
        raise InvalidParameter(f"chi-square needs dof >= 1, got {dof}")
    if size is None:
        z = rng.normal(dof)
        return float(np.dot(z, z))
    shape = (size,) if np.isscalar(size) else tuple(size)
    z = rng.normal(shape + (dof,))
    return np.einsum("...i,...i->...", z, z)


def bernoulli(p: float, rng: RngStream, size=None):
    """Bernoulli(p) bits as uint8."""
    if not 0.0 <= p <= 1.0:
        raise InvalidParameter(f"probability out of range: {p}")
    return (rng.uniform(size) < p).astype(np.uint8)


def binomial(n: int, p: float, rng: RngStream) -> int:
    """Bin(n, p) as a literal sum of n Bernoulli draws."""
    if n < 0:
        raise InvalidParameter(f"binomial needs n >= 0, got {n}")
    if not 0.0 <= p <= 1.0:
        raise InvalidParameter(f"probability out of range: {p}")
    if n == 0:
        return 0
    return int(np.count_nonzero(rng.uniform(n) < p))


def uniform_subset(n: int, k: int, rng: RngStream) -> np.ndarray:
    """Uniform k-subset of range(n), sorted."""
    if k < 0 or k > n:
        raise InvalidParameter(f"cannot draw a {k}-subset of {n} items")
    if k == n:
        return np.arange(n, dtype=np.int64)
    return np.sort(rng.generator.choice(n, size=k, replace=False)).astype(np.int64)


def uniform_permutation(n: int, rng: RngStream) -> np.ndarray:
    """Uniform permutation of range(n)."""
    if n < 0:
        raise InvalidParameter(f"negative length {n}")
    return rng.generator.permutation(n).astype(np.int64)
