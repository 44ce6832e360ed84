"""Baseline detectors for planted clique and sparse PCA.

Every test returns a :class:`DetectionResult`; the decision is H1 exactly
when the statistic exceeds the threshold. Sample matrices are ``d x n`` with
samples as columns.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Optional

import numpy as np

from .core.rng import RngStream
from .errors import BudgetExceeded, InvalidParameter
from .instances import H0, H1, Graph

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class DetectionResult:
    statistic: float
    threshold: float

    @property
    def decision(self) -> str:
        return H1 if self.statistic > self.threshold else H0

    def __str__(self):
        return f"statistic={self.statistic:.6g} threshold={self.threshold:.6g} decision={self.decision}"


def empirical_covariance(samples) -> np.ndarray:
    """``(1/n) X X^T`` for a ``d x n`` sample matrix, symmetrized exactly."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise InvalidParameter(f"need a d x n sample matrix with n >= 1, got shape {x.shape}")
    cov = (x @ x.T) / x.shape[1]
    return 0.5 * (cov + cov.T)


def _lambda_max(sym) -> float:
    return float(np.linalg.eigvalsh(sym)[-1])


def spectral_statistic(samples) -> float:
    return _lambda_max(empirical_covariance(samples))


def sum_statistic(samples) -> float:
    cov = empirical_covariance(samples)
    d = cov.shape[0]
    # fsum is correctly rounded, so the value does not depend on entry order
    return (math.fsum(cov.ravel()) - d) / d


def spca_spectral_test(samples, threshold: float) -> DetectionResult:
    """Largest eigenvalue of the empirical covariance."""
    return DetectionResult(spectral_statistic(samples), float(threshold))


def spca_sum_test(samples, threshold: float) -> DetectionResult:
    """Sum of the entries of ``Sigma_hat - I`` divided by ``d``."""
    return DetectionResult(sum_statistic(samples), float(threshold))


def spca_k_sparse_eigenvalue(samples, k: int, budget: int = 10 ** 6) -> float:
    """Maximum over size-``k`` index sets of the top eigenvalue of the minor.

    Enumerates all ``C(d, k)`` minors; raises :class:`BudgetExceeded` when
    that count is above ``budget``.
    """
    cov = empirical_covariance(samples)
    d = cov.shape[0]
    if not 1 <= k <= d:
        raise InvalidParameter(f"need 1 <= k <= d, got k={k}, d={d}")
    count = math.comb(d, k)
    if count > budget:
        raise BudgetExceeded(f"C({d},{k}) = {count} minors exceeds budget {budget}")
    best = -math.inf
    # batch minors to keep the eigensolver vectorized
    batch = 4096
    combos = itertools.combinations(range(d), k)
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            break
        idx = np.asarray(chunk)
        minors = cov[idx[:, :, None], idx[:, None, :]]
        best = max(best, float(np.linalg.eigvalsh(minors)[:, -1].max()))
    return best


def spca_k_sparse_test(samples, k: int, threshold: float, budget: int = 10 ** 6) -> DetectionResult:
    return DetectionResult(spca_k_sparse_eigenvalue(samples, k, budget), float(threshold))


# ---------------------------------------------------------------------------
# planted clique


def edge_zscore(g: Graph, q: float) -> float:
    pairs = g.n * (g.n - 1) // 2
    if pairs == 0:
        return 0.0
    return (g.edge_count - q * pairs) / math.sqrt(pairs * q * (1.0 - q))


def clique_edge_test(g: Graph, n: Optional[int] = None, k: Optional[int] = None,
                     q: float = 0.5, level: float = 0.05,
                     two_sided: bool = False) -> DetectionResult:
    """Edge-count z-score against ``Bin(C(n,2), q)``.

    One-sided (more edges than expected) by default. With ``two_sided`` the
    statistic is ``|z|`` so an unusually sparse graph is also flagged. ``k``
    is accepted for interface symmetry and does not enter the statistic.
    """
    if n is not None and n != g.n:
        raise InvalidParameter(f"graph has {g.n} vertices, expected {n}")
    if not 0.0 < q < 1.0 or not 0.0 < level < 1.0:
        raise InvalidParameter("need 0 < q < 1 and 0 < level < 1")
    z = edge_zscore(g, q)
    if two_sided:
        return DetectionResult(abs(z), _STD_NORMAL.inv_cdf(1.0 - level / 2.0))
    return DetectionResult(z, _STD_NORMAL.inv_cdf(1.0 - level))


def clique_max_degree_test(g: Graph, n: Optional[int] = None, k: Optional[int] = None,
                           q: float = 0.5, level: float = 0.05) -> DetectionResult:
    """Max-degree z-score against ``Bin(n-1, q)``, union bound over vertices."""
    if n is not None and n != g.n:
        raise InvalidParameter(f"graph has {g.n} vertices, expected {n}")
    if not 0.0 < q < 1.0 or not 0.0 < level < 1.0:
        raise InvalidParameter("need 0 < q < 1 and 0 < level < 1")
    if g.n < 2:
        return DetectionResult(0.0, math.inf)
    m = g.n - 1
    z = (float(g.degrees().max()) - q * m) / math.sqrt(m * q * (1.0 - q))
    return DetectionResult(z, _STD_NORMAL.inv_cdf(1.0 - level / g.n))


# ---------------------------------------------------------------------------
# calibration and error summaries


def calibrate_threshold(statistic: Callable, null_sampler: Callable, trials: int,
                        rng: RngStream, level: float = 0.05) -> float:
    """Empirical ``1 - level`` quantile of ``statistic`` under the null.

    ``null_sampler(stream)`` draws one null instance; trial ``i`` uses
    ``rng.split(i)``.
    """
    if trials < 1:
        raise InvalidParameter("trials must be positive")
    values = np.array([statistic(null_sampler(rng.split(i))) for i in range(trials)])
    return float(np.quantile(values, 1.0 - level, method="higher"))


def type_i_ii_error(null_decisions, alt_decisions) -> float:
    """False-positive rate plus miss rate."""
    null = np.asarray([d == H1 for d in null_decisions], dtype=float)
    alt = np.asarray([d == H0 for d in alt_decisions], dtype=float)
    return float(null.mean() + alt.mean())


def auc(null_stats, alt_stats) -> float:
    """Probability that an alternative statistic beats a null one (ties count half)."""
    a = np.asarray(null_stats, dtype=float)
    b = np.asarray(alt_stats, dtype=float)
    if a.size == 0 or b.size == 0:
        raise InvalidParameter("need nonempty statistic lists")
    greater = (b[:, None] > a[None, :]).sum()
    ties = (b[:, None] == a[None, :]).sum()
    return float((greater + 0.5 * ties) / (a.size * b.size))


TESTS = {
    "spectral": spectral_statistic,
    "sum": sum_statistic,
}
