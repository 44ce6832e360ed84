"""Dense matrix helpers: Haar frames, PSD square roots, symmetry."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidParameter, NotPositiveSemidefinite
from .rng import RngStream

# pivot norms below this trigger a resample of the row
_RANK_EPS = 1e-12


def as_real_matrix(a) -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting NaN/Inf."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidParameter(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidParameter("matrix has non-finite entries")
    return a


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle onto the lower so that a == a.T exactly."""
    a = np.asarray(a, dtype=np.float64)
    upper = np.triu(a)
    return upper + np.triu(a, 1).T


def is_symmetric(a: np.ndarray, rtol: float = 1e-10) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    return bool(np.max(np.abs(a - a.T), initial=0.0) <= rtol * scale)


def haar_frame(m: int, n: int, rng: RngStream) -> np.ndarray:
    """First ``m`` rows of a Haar-distributed ``n x n`` orthogonal matrix.

    Classical Gram-Schmidt with a second re-orthogonalization pass applied to
    the rows of an ``m x n`` standard normal matrix. A row whose residual norm
    drops below 1e-12 is redrawn.
    """
    if m < 0 or n < 1:
        raise InvalidParameter(f"bad frame shape ({m}, {n})")
    if m > n:
        raise InvalidParameter(f"cannot fit {m} orthonormal rows in dimension {n}")
    q = rng.normal((m, n))
    for i in range(m):
        v = q[i]
        while True:
            if i:
                basis = q[:i]
                v = v - basis.T @ (basis @ v)
                v = v - basis.T @ (basis @ v)
            norm = np.linalg.norm(v)
            if norm >= _RANK_EPS:
                break
            v = rng.normal(n)
        q[i] = v / norm
    return q


def haar_orthogonal(n: int, rng: RngStream) -> np.ndarray:
    """Haar-distributed ``n x n`` orthogonal matrix."""
    return haar_frame(n, n, rng)


def psd_sqrt(s, tol: float | None = None, return_clipped: bool = False):
    """Symmetric PSD square root by eigendecomposition.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything below ``-tol``
    raises :class:`NotPositiveSemidefinite`. ``tol`` defaults to
    ``1e-8 * ||s||_2``.
    """
    s = as_real_matrix(s)
    if not is_symmetric(s):
        raise InvalidParameter("psd_sqrt needs a symmetric matrix")
    s = symmetrize(s)
    w, v = np.linalg.eigh(s)
    if tol is None:
        tol = 1e-8 * float(np.max(np.abs(w), initial=0.0))
    if w.size and w[0] < -tol:
        raise NotPositiveSemidefinite(w[0], tol)
    clipped = int(np.count_nonzero(w < 0))
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    root = symmetrize(root)
    if return_clipped:
        return root, clipped
    return root
