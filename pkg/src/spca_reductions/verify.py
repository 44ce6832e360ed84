"""Statistical verification harness.

The building blocks are exact pmf identity residuals, one- and two-sample
Kolmogorov-Smirnov statistics, a pooled Pearson chi-square test and
studentized covariance deviations. :func:`run_suite` assembles them into
named suites of :class:`CheckReport` rows.

Monte Carlo checks are sized for a false-failure probability of at most 1%
each. A failing check is rerun once on an independent seed and both seeds
are recorded.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special, stats

from .core.rng import RngStream
from .detectors import empirical_covariance
from .errors import HypothesisWarning, InvalidParameter
from .instances import (
    PdsParams,
    gen_er_graph,
    gen_pds,
    gen_wishart,
    gw_covariance,
    gw_sample_indrep,
    uniform_spike_vector,
)
from .pipelines import (
    CtwConfig,
    SrrConfig,
    clique_to_wishart,
    ctw_covariance,
    inverse_wishart_sample,
    sparsity_cloning,
    subsampling_random_rotations,
)
from .primitives import (
    CloneParams,
    RkParams,
    chi2_random_rotation,
    clone_pmf_table,
    product_pmf,
    q_submatrix,
    q_three_way,
    rk_gaussian_batch,
)

SUITES = ("cloning", "rejection", "rotation", "wishart", "pipeline", "subsample", "sparsify")
_RETRY_SALT = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class CheckReport:
    name: str
    statistic: float
    bound: float
    trials: int
    seed: int
    retry_seed: Optional[int] = None

    @property
    def passed(self) -> bool:
        return bool(self.statistic <= self.bound)


# ---------------------------------------------------------------------------
# building blocks


def mixture_identity_residual(cp: CloneParams) -> float:
    """Largest violation of the two mixture identities over all 2^t outcomes.

    ``(1-q) R0 + q R1`` must equal ``Bern(Q)^t`` and ``(1-p) R0 + p R1``
    must equal ``Bern(P)^t``.
    """
    r0 = clone_pmf_table(0, cp)
    r1 = clone_pmf_table(1, cp)
    null = np.abs((1.0 - cp.q) * r0 + cp.q * r1 - product_pmf(cp.Q, cp.t))
    alt = np.abs((1.0 - cp.p) * r0 + cp.p * r1 - product_pmf(cp.P, cp.t))
    return float(max(null.max(), alt.max()))


def normal_cdf(x, mean: float = 0.0, sd: float = 1.0):
    return special.ndtr((np.asarray(x, dtype=float) - mean) / sd)


def ks_statistic(samples, cdf: Callable) -> float:
    """One-sample KS distance between the empirical cdf and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise InvalidParameter("ks_statistic needs at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def two_sample_ks(a, b) -> float:
    """Two-sample KS distance between empirical cdfs."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise InvalidParameter("two_sample_ks needs nonempty inputs")
    grid = np.concatenate((a, b))
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_coefficient(alpha: float) -> float:
    """Asymptotic KS coefficient ``c(alpha)`` with ``P[sqrt(n) D > c] = alpha``."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0))


def ks_critical(n: int, alpha: float = 0.01, m: Optional[int] = None) -> float:
    """Critical value ``c(alpha)/sqrt(n_eff)``; two-sample when ``m`` is given."""
    n_eff = n if m is None else n * m / (n + m)
    return ks_coefficient(alpha) / math.sqrt(n_eff)


def discrete_gof(counts, pmf, min_expected: float = 5.0):
    """Pearson chi-square with small cells pooled.

    Cells with expected count below ``min_expected`` are merged into one cell;
    if that pooled cell is itself below the threshold it is merged into the
    smallest remaining cell. Returns ``(chi2, dof)``.
    """
    counts = np.asarray(counts, dtype=float).ravel()
    pmf = np.asarray(pmf, dtype=float).ravel()
    if counts.shape != pmf.shape:
        raise InvalidParameter("counts and pmf must have the same length")
    if abs(pmf.sum() - 1.0) > 1e-9 or np.any(pmf < 0):
        raise InvalidParameter("pmf must be nonnegative and sum to 1")
    total = counts.sum()
    if total <= 0:
        raise InvalidParameter("need at least one observation")
    expected = total * pmf
    big = expected >= min_expected
    obs_cells = list(counts[big])
    exp_cells = list(expected[big])
    small_exp = expected[~big].sum()
    small_obs = counts[~big].sum()
    if small_exp > 0 or small_obs > 0:
        if small_exp >= min_expected or not exp_cells:
            obs_cells.append(small_obs)
            exp_cells.append(small_exp)
        else:
            j = int(np.argmin(exp_cells))
            obs_cells[j] += small_obs
            exp_cells[j] += small_exp
    obs = np.array(obs_cells)
    exp = np.array(exp_cells)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(exp > 0, (obs - exp) ** 2 / exp, np.where(obs > 0, np.inf, 0.0))
    return float(terms.sum()), max(len(exp) - 1, 0)


def chi2_quantile(q: float, dof: int) -> float:
    return float(stats.chi2.ppf(q, dof)) if dof > 0 else 0.0


def covariance_zscores(samples, target) -> np.ndarray:
    """Entrywise z-scores of the empirical covariance against ``target``.

    Uses the Gaussian fourth-moment standard error
    ``sqrt((T_aa T_bb + T_ab^2) / n)``.
    """
    x = np.asarray(samples, dtype=float)
    n = x.shape[1]
    if n < 2:
        raise InvalidParameter("need at least two samples")
    t = np.asarray(target, dtype=float)
    diag = np.diag(t)
    se = np.sqrt((np.outer(diag, diag) + t ** 2) / n)
    return (empirical_covariance(x) - t) / se


def covariance_deviation(samples, target):
    """``(max |z|, Frobenius norm of Sigma_hat - target)``."""
    z = covariance_zscores(samples, target)
    dev = empirical_covariance(samples) - np.asarray(target, dtype=float)
    return float(np.max(np.abs(z))), float(np.linalg.norm(dev))


def max_coordinate_ks(samples, reference=None) -> float:
    """Largest per-row KS distance, against N(0,1) or the matching row of ``reference``."""
    x = np.asarray(samples, dtype=float)
    if reference is None:
        return max(ks_statistic(row, normal_cdf) for row in x)
    return max(two_sample_ks(a, b) for a, b in zip(x, np.asarray(reference, dtype=float)))


# ---------------------------------------------------------------------------
# suites


def cloning_grid():
    """Parameter sets used by the deterministic cloning suite."""
    out = []
    for p in (1.0, 0.9, 0.7):
        for q in (0.5, 0.3):
            qp = q_submatrix(p, q)
            out.append(CloneParams(2, p, q, p, qp))
            out.append(CloneParams(3, p, qp, p, q_three_way(p, q)))
    out.append(CloneParams(2, 0.9, 0.3, 0.7, 0.5))
    out.append(CloneParams(1, 0.8, 0.4, 0.8, 0.4))
    return out


def _check_cloning(rng: RngStream):
    grid = cloning_grid()
    residual = max(mixture_identity_residual(cp) for cp in grid)
    negative = max(max(-clone_pmf_table(b, cp).min(), 0.0) for cp in grid for b in (0, 1))
    return [
        ("cloning.mixture_identity", residual, 1e-12, len(grid)),
        ("cloning.pmf_nonnegative", negative, 1e-12, len(grid)),
    ]


def _check_rejection(rng: RngStream, draws: int = 100_000):
    rows = []
    for j, (P, Q, N) in enumerate(((1.0, 2 ** -0.5, 100), (0.8, 0.4, 100))):
        rk = RkParams(P, Q, N)
        mu = 0.5 * rk.mu_cap
        # the kernel maps Bern(Q) input to N(0,1) and Bern(P) input to N(mu,1)
        s_null, s_alt = rng.split(2 * j), rng.split(2 * j + 1)
        null = rk_gaussian_batch(s_null.split(0).uniform(draws) < Q, mu, rk, s_null.split(1))
        alt = rk_gaussian_batch(s_alt.split(0).uniform(draws) < P, mu, rk, s_alt.split(1))
        bound = ks_critical(draws, 0.01)
        tag = f"P={P:.3g},Q={Q:.3g}"
        rows.append((f"rejection.null_ks[{tag}]", ks_statistic(null, normal_cdf), bound, draws))
        rows.append((f"rejection.alt_ks[{tag}]",
                     ks_statistic(alt, lambda x: normal_cdf(x, mu)), bound, draws))
    return rows


def rotation_samples(planted: bool, runs: int, rng: RngStream, N: int = 12, k: int = 3,
                     P: float = 0.9, Q: float = 0.1):
    """Pool the columns of ``runs`` rotation outputs with the kernel at its cap."""
    rk = RkParams(P, Q, N)
    tau = rk.mu_cap
    support = np.arange(k)
    cols = []
    for r in range(runs):
        s = rng.split(r)
        bits = (s.split(0).uniform((N, N)) < Q).astype(np.uint8)
        if planted:
            inner = (s.split(1).uniform((k, k)) < P).astype(np.uint8)
            bits[np.ix_(support, support)] = inner
        cols.append(chi2_random_rotation(bits, k, tau, rk, s.split(2)))
    target = np.eye(N)
    if planted:
        v = uniform_spike_vector(N, support)
        target = target + (tau ** 2 * k ** 2 / (4.0 * N)) * np.outer(v, v)
    return np.hstack(cols), target


def _check_rotation(rng: RngStream, runs: int = 400):
    rows = []
    for j, planted in enumerate((False, True)):
        x, target = rotation_samples(planted, runs, rng.split(j))
        z, _ = covariance_deviation(x, target)
        rows.append((f"rotation.covariance[{'planted' if planted else 'null'}]", z, 6.0, runs))
    return rows


def _check_wishart(rng: RngStream):
    rows = []
    # independent-sum representation versus the closed-form covariance
    d, support, theta, draws = 6, np.arange(3), 0.5, 100_000
    x = gw_sample_indrep(1.0, d, support, theta, rng.split(0), size=draws).reshape(draws, d * d)
    emp = x.T @ x / draws
    sq = (x ** 2).T @ (x ** 2) / draws
    se = np.sqrt(np.maximum(sq - emp ** 2, 1e-300) / draws)
    target = np.empty_like(emp)
    for i in range(d * d):
        a, b = divmod(i, d)
        for j in range(d * d):
            c, e = divmod(j, d)
            target[i, j] = gw_covariance(a, b, c, e, support, 3, theta, 1.0)
    rows.append(("wishart.gw_indrep", float(np.max(np.abs(emp - target) / se)), 5.0, draws))

    # inverse Wishart sampling against direct draws
    sigma = np.diag([1.5, 1.0])
    n, batches = 50, 400
    cols = []
    for b in range(batches):
        s = rng.split(1).split(b)
        w = gen_wishart(sigma, n, s.split(0))
        cols.append(inverse_wishart_sample(w, n, s.split(1)))
    y = np.hstack(cols)
    direct = np.sqrt(np.diag(sigma))[:, None] * rng.split(2).normal(y.shape)
    n_cols = y.shape[1]
    rows.append(("wishart.inverse_ks", max_coordinate_ks(y, direct),
                 ks_critical(n_cols, 0.01 / 2, n_cols), n_cols))
    rows.append(("wishart.inverse_covariance", covariance_deviation(y, sigma)[0], 5.0, n_cols))
    return rows


def _check_pipeline(rng: RngStream, runs: int = 60):
    """Clique-to-Wishart at a small size with the signal inside every cap."""
    base = dict(N=8, k=2, p=1.0, q=0.5, n=400, d=18)
    probe = CtwConfig(theta=0.0, **base)
    rk = RkParams(probe.p, probe.Q, probe.m)
    theta = rk.mu_cap ** 2 * probe.k ** 2 / (12.0 * probe.m)
    cfg = CtwConfig(theta=theta, **base)
    m, n = cfg.m, cfg.n
    sig = np.empty((runs, m, m))
    outputs = []
    with warnings.catch_warnings():
        # n >= N^3 is not met at this size; the structural checks still apply
        warnings.simplefilter("ignore", HypothesisWarning)
        for r in range(runs):
            g = gen_er_graph(cfg.N, cfg.q, rng.split(0).split(r))
            sig[r] = ctw_covariance(g, cfg, rng.split(1).split(r))
        for r in range(20):
            g = gen_er_graph(cfg.N, cfg.q, rng.split(2).split(r))
            outputs.append(clique_to_wishart(g, cfg, rng.split(3).split(r))[0])
        g, s = gen_pds(PdsParams(cfg.N, cfg.k, cfg.p, cfg.q), rng.split(4))
        _, instr = clique_to_wishart(g, cfg, rng.split(5), support=s)
    mean_target = n * np.eye(m)
    var_target = np.where(np.eye(m, dtype=bool), 2.0 * n, float(n))
    iu = np.triu_indices(m)
    mean_z = (sig.mean(0) - mean_target) / np.sqrt(var_target / runs)
    # sample variance of Gaussian entries has standard error var*sqrt(2/(R-1))
    var_z = (sig.var(0, ddof=1) - var_target) / (var_target * math.sqrt(2.0 / (runs - 1)))
    pooled = np.hstack(outputs)
    sizes = [len(s) for _, s in instr.planted_support_stagewise]
    return [
        ("pipeline.sigma_e_mean", float(np.abs(mean_z[iu]).max()), 5.0, runs),
        ("pipeline.sigma_e_variance", float(np.abs(var_z[iu]).max()), 5.0, runs),
        ("pipeline.null_covariance", covariance_deviation(pooled, np.eye(cfg.d))[0], 6.0, 20),
        ("pipeline.support_sizes", float(max(abs(x - cfg.k) for x in sizes)), 0.0, 1),
    ]


def _check_subsample(rng: RngStream, runs: int = 2000):
    cfg = SrrConfig(N=20, K=6, k=3, p=1.0, q=0.5, d=48, theta=0.0)
    rk = RkParams(cfg.p, cfg.Q, cfg.n)
    theta = rk.mu_cap ** 2 * cfg.K * cfg.k / (4.0 * cfg.n)
    cfg = SrrConfig(N=20, K=6, k=3, p=1.0, q=0.5, d=48, theta=theta)
    counts = np.zeros(cfg.K + 1)
    for r in range(runs):
        s = rng.split(r)
        g, support = gen_pds(PdsParams(cfg.N, cfg.K, cfg.p, cfg.q), s.split(0))
        _, instr = subsampling_random_rotations(g, cfg, s.split(1), support=support)
        counts[len(instr.support())] += 1
    pmf = stats.binom.pmf(np.arange(cfg.K + 1), cfg.K, cfg.k / cfg.K)
    chi2, dof = discrete_gof(counts, pmf / pmf.sum())
    return [("subsample.support_size_gof", chi2, chi2_quantile(0.99, dof), runs)]


def _check_sparsify(rng: RngStream, n: int = 20_000):
    d, k, theta, ell = 4, 2, 0.8, 2
    x0 = rng.split(0).normal((d, n))
    y0, _ = sparsity_cloning(x0, ell, rng.split(1))
    fresh = rng.split(2).normal(y0.shape)
    width = y0.shape[0]
    v = uniform_spike_vector(d, np.arange(k))
    x1 = x0 + math.sqrt(theta) * v[:, None] * rng.split(3).normal(n)[None, :]
    y1, instr = sparsity_cloning(x1, ell, rng.split(4), support=np.arange(k))
    t = instr.support()
    vt = uniform_spike_vector(width, t)
    target = np.eye(width) + theta * np.outer(vt, vt)
    return [
        ("sparsify.null_two_sample_ks", max_coordinate_ks(y0, fresh),
         ks_critical(n, 0.01 / width, n), n),
        ("sparsify.covariance", covariance_deviation(y1, target)[0], 6.0, n),
        ("sparsify.support_size", float(abs(len(t) - 2 ** ell * k)), 0.0, 1),
    ]


_CHECKS = {
    "cloning": _check_cloning,
    "rejection": _check_rejection,
    "rotation": _check_rotation,
    "wishart": _check_wishart,
    "pipeline": _check_pipeline,
    "subsample": _check_subsample,
    "sparsify": _check_sparsify,
}


def _run_once(name: str, seed: int):
    return _CHECKS[name](RngStream(seed, (SUITES.index(name),)))


def run_suite(name: str, seed: int = 0) -> list:
    """Run a named suite; failing rows are rerun once on an independent seed."""
    if name not in _CHECKS:
        raise InvalidParameter(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    first = _run_once(name, seed)
    reports = [CheckReport(n, float(s), float(b), int(t), seed) for n, s, b, t in first]
    if all(r.passed for r in reports) or name == "cloning":
        return reports
    retry_seed = (seed ^ _RETRY_SALT) & (2 ** 64 - 1)
    second = {row[0]: row for row in _run_once(name, retry_seed)}
    out = []
    for r in reports:
        if r.passed:
            out.append(r)
        else:
            n, s, b, t = second[r.name]
            out.append(CheckReport(n, float(s), float(b), int(t), seed, retry_seed))
    return out


def run_suites(names, seed: int = 0, workers: int = 1) -> list:
    """Run several suites, optionally in threads; output order follows ``names``."""
    if workers <= 1:
        results = [run_suite(n, seed) for n in names]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda n: run_suite(n, seed), names))
    return [r for block in results for r in block]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "statistic", "bound", "passed", "trials", "seed", "retry_seed"])
    for r in reports:
        w.writerow([r.name, repr(r.statistic), repr(r.bound), str(r.passed).lower(), r.trials,
                    r.seed, "" if r.retry_seed is None else r.retry_seed])
    return buf.getvalue()
