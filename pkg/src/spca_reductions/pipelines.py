"""End-to-end reductions from planted dense subgraph to sparse PCA.

* :func:`clique_to_wishart` builds a scaled empirical covariance matrix from
  independent Gaussian pieces and converts it to samples by inverse Wishart
  sampling.
* :func:`subsampling_random_rotations` rotates a Gaussianized submatrix
  instance and keeps each planted row with probability k/K.
* :func:`sparsity_cloning` doubles dimension and sparsity ``ell`` times
  while preserving the signal strength.

Each pipeline returns ``(samples, Instrumentation)`` where ``samples`` is a
``d x n`` array with samples as columns.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .core.linalg import haar_frame, psd_sqrt, symmetrize
from .core.rng import RngStream
from .core.sampling import uniform_permutation, uniform_subset
from .errors import InvalidParameter, NotPositiveSemidefinite, soft_check
from .instances import Graph
from .primitives import (
    CloneParams,
    Diagnostics,
    RkParams,
    bernoulli_matrix_clone,
    chi2_random_rotation,
    gaussianize,
    q_submatrix,
    q_three_way,
    to_bernoulli_submatrix,
)

# above this many entries the sparsity-cloning output is refused
DEFAULT_MEMORY_BUDGET = 10 ** 8


def smallest_multiple_above(k: int, x: float) -> int:
    """Smallest multiple of ``k`` strictly greater than ``x``."""
    return k * math.floor(x / k) + k


@dataclass
class Instrumentation:
    """Side channel recording latent quantities of a pipeline run."""

    planted_support_stagewise: list = field(default_factory=list)
    latent_g: Optional[float] = None
    embedded_rows: Optional[np.ndarray] = None
    rk_exhaustions: int = 0
    rk_draws: int = 0
    truncations: int = 0
    psd_clip_count: int = 0
    sigma_not_psd: bool = False

    def record(self, stage: str, support) -> None:
        self.planted_support_stagewise.append((stage, np.asarray(support, dtype=np.int64)))

    def support(self, stage: Optional[str] = None) -> Optional[np.ndarray]:
        """Support at ``stage`` (default: the last recorded stage)."""
        if not self.planted_support_stagewise:
            return None
        if stage is None:
            return self.planted_support_stagewise[-1][1]
        for name, s in self.planted_support_stagewise:
            if name == stage:
                return s
        raise KeyError(stage)

    def absorb(self, diag: Diagnostics) -> None:
        self.rk_exhaustions += diag.rk_exhaustions
        self.rk_draws += diag.rk_draws
        self.truncations += diag.truncations

    def to_dict(self) -> dict:
        return {
            "planted_support_stagewise": [
                [name, [int(i) + 1 for i in s]] for name, s in self.planted_support_stagewise
            ],
            "latent_g": self.latent_g,
            "embedded_rows": None if self.embedded_rows is None
            else [int(i) + 1 for i in self.embedded_rows],
            "rk_exhaustions": self.rk_exhaustions,
            "rk_draws": self.rk_draws,
            "truncations": self.truncations,
            "psd_clip_count": self.psd_clip_count,
            "sigma_not_psd": self.sigma_not_psd,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# ---------------------------------------------------------------------------
# configuration


def _coerce(value: str):
    low = value.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value.strip()


def parse_config(text: str) -> dict:
    """Parse flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameter(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = _coerce(value)
    return out


def read_config(path) -> dict:
    with open(path) as fh:
        return parse_config(fh.read())


def _from_mapping(cls, mapping: dict):
    names = {f.name for f in fields(cls)}
    kwargs = {k: v for k, v in mapping.items() if k in names}
    return cls(**kwargs)


@dataclass(frozen=True)
class CtwConfig:
    """Parameters for clique-to-Wishart.

    ``c`` is the constant in the signal cap ``theta <= c sqrt(k^2/(n log N))``.
    """

    N: int
    k: int
    p: float
    q: float
    n: int
    d: int
    theta: float
    epsilon: float = 0.5
    c: float = 1.0
    strict: bool = False

    def __post_init__(self):
        if not 0.0 < self.q < self.p <= 1.0:
            raise InvalidParameter(f"need 0 < q < p <= 1, got p={self.p}, q={self.q}")
        if not 1 <= self.k <= self.N:
            raise InvalidParameter(f"need 1 <= k <= N, got k={self.k}, N={self.N}")
        if not self.epsilon > 0:
            raise InvalidParameter("epsilon must be positive")
        if self.theta < 0:
            raise InvalidParameter("theta must be nonnegative")
        if self.N < 2:
            raise InvalidParameter("N must be at least 2")
        need = (self.p / self.q_prime + self.epsilon) * self.N + self.k
        if self.d < need:
            raise InvalidParameter(f"d={self.d} must be at least (p/Q'+eps)N + k = {need:.4g}")
        if self.n < self.m:
            raise InvalidParameter(f"n={self.n} must be at least m={self.m}")

    from_mapping = classmethod(_from_mapping)

    @property
    def q_prime(self) -> float:
        return q_submatrix(self.p, self.q)

    @property
    def Q(self) -> float:
        return q_three_way(self.p, self.q)

    @property
    def m(self) -> int:
        return smallest_multiple_above(self.k, (self.p / self.q_prime + self.epsilon) * self.N)

    @property
    def tau(self) -> float:
        return 2.0 * math.sqrt(3.0 * self.m * self.theta) / self.k

    @property
    def g_cap(self) -> float:
        return 4.0 * math.sqrt(math.log(self.m))

    @property
    def theta_cap(self) -> float:
        return self.c * math.sqrt(self.k ** 2 / (self.n * math.log(self.N)))

    def check_hypotheses(self) -> None:
        soft_check(self.n >= self.N ** 3,
                   f"n={self.n} is below N^3={self.N ** 3}", self.strict)
        soft_check(self.theta <= self.theta_cap,
                   f"theta={self.theta:.4g} exceeds c*sqrt(k^2/(n log N))={self.theta_cap:.4g}",
                   self.strict)


@dataclass(frozen=True)
class SrrConfig:
    """Parameters for subsampling random rotations.

    ``K`` is the planted size in the graph, ``k`` the target expected sparsity.
    """

    N: int
    K: int
    k: int
    p: float
    q: float
    d: int
    theta: float
    epsilon: float = 0.5
    c: float = 1.0
    strict: bool = False

    def __post_init__(self):
        if not 0.0 < self.q < self.p <= 1.0:
            raise InvalidParameter(f"need 0 < q < p <= 1, got p={self.p}, q={self.q}")
        if not 1 <= self.K <= self.N:
            raise InvalidParameter(f"need 1 <= K <= N, got K={self.K}, N={self.N}")
        if not 1 <= self.k or 2 * self.k > self.K:
            raise InvalidParameter(f"need 1 <= k <= K/2, got k={self.k}, K={self.K}")
        if not self.epsilon > 0:
            raise InvalidParameter("epsilon must be positive")
        if self.theta < 0:
            raise InvalidParameter("theta must be nonnegative")
        if self.d < self.n:
            raise InvalidParameter(f"d={self.d} must be at least n={self.n}")

    from_mapping = classmethod(_from_mapping)

    @property
    def Q(self) -> float:
        return q_submatrix(self.p, self.q)

    @property
    def n(self) -> int:
        return smallest_multiple_above(self.K, (self.p / self.Q + self.epsilon) * self.N + self.K)

    @property
    def tau(self) -> float:
        return 2.0 * math.sqrt(self.n * self.theta / (self.K * self.k))

    @property
    def theta1(self) -> float:
        """Spike strength on the K planted rows after the rotation."""
        return self.tau ** 2 * self.K ** 2 / (4.0 * self.n)

    @property
    def theta_cap(self) -> float:
        return self.c * self.K * self.k / (self.n * math.sqrt(math.log(self.N)))

    def check_hypotheses(self) -> None:
        soft_check(self.theta <= self.theta_cap,
                   f"theta={self.theta:.4g} exceeds c*K*k/(n sqrt(log N))={self.theta_cap:.4g}",
                   self.strict)


# ---------------------------------------------------------------------------
# inverse Wishart sampling


def inverse_wishart_sample(sigma_e, n: int, rng: RngStream,
                           instr: Optional[Instrumentation] = None,
                           tol: Optional[float] = None) -> np.ndarray:
    """Turn an ``m x m`` covariance draw into ``n`` samples: ``sqrt(Sigma_e) R``.

    ``R`` is an ``m x n`` Haar frame. If ``Sigma_e`` is not PSD within
    tolerance the zero matrix is returned and ``instr.sigma_not_psd`` is set.
    """
    sigma_e = np.asarray(sigma_e, dtype=np.float64)
    m = sigma_e.shape[0]
    if n < m:
        raise InvalidParameter(f"need n >= m, got n={n}, m={m}")
    try:
        root, clipped = psd_sqrt(sigma_e, tol=tol, return_clipped=True)
    except NotPositiveSemidefinite:
        if instr is not None:
            instr.sigma_not_psd = True
        return np.zeros((m, n))
    if instr is not None:
        instr.psd_clip_count += clipped
    return root @ haar_frame(m, n, rng)


def _pad_rows(rows: np.ndarray, d: int, rng: RngStream):
    """Place ``rows`` at uniformly random distinct positions of a ``d``-row matrix.

    Unused rows are iid standard normal. Returns the matrix and the position
    assigned to each input row.
    """
    count, n = rows.shape
    positions = uniform_subset(d, count, rng.split(0))[uniform_permutation(count, rng.split(1))]
    out = rng.split(2).normal((d, n))
    out[positions] = rows
    return out, positions


# ---------------------------------------------------------------------------
# clique to Wishart


def ctw_covariance(g: Graph, cfg: CtwConfig, rng: RngStream, support=None,
                   instr: Optional[Instrumentation] = None) -> np.ndarray:
    """Steps 1-5 of clique-to-Wishart: the ``m x m`` matrix ``Sigma_e``.

    Under the null this is close to ``W_m(n, I)``; with a planted clique on
    ``support`` it is close to ``W_m(n, I + theta u u^T)`` for a k-sparse ``u``.
    """
    if g.n != cfg.N:
        raise InvalidParameter(f"graph has {g.n} vertices, config says N={cfg.N}")
    cfg.check_hypotheses()
    if instr is None:
        instr = Instrumentation()
    diag = Diagnostics()
    m, k, n = cfg.m, cfg.k, cfg.n
    if support is not None:
        instr.record("graph", support)

    x, emb = to_bernoulli_submatrix(g, cfg.p, cfg.q, m, rng.split(1))
    if support is not None:
        instr.record("submatrix", emb.image(support))

    cp = CloneParams(3, cfg.p, cfg.q_prime, cfg.p, cfg.Q)
    x1, x2, x3 = bernoulli_matrix_clone(x, cp, rng.split(2))

    gval = float(rng.split(3).normal())
    if abs(gval) >= cfg.g_cap:
        gval = 0.0
    instr.latent_g = gval
    rk = RkParams(cfg.p, cfg.Q, m)
    mu = cfg.theta * math.sqrt(3.0) / k * (math.sqrt(n / 2.0) + gval)
    mean_mat = gaussianize(x1, mu, rk, rng.split(4), cfg.strict, diag)

    c_left = chi2_random_rotation(x2, k, cfg.tau, rk, rng.split(5), cfg.strict, diag).T
    c_right = chi2_random_rotation(x3, k, cfg.tau, rk, rng.split(6), cfg.strict, diag)

    noise = mean_mat + c_left + c_right
    sigma_e = n * np.eye(m) + math.sqrt(n / 6.0) * (noise + noise.T)
    instr.absorb(diag)
    return symmetrize(sigma_e)


def clique_to_wishart(g: Graph, cfg: CtwConfig, rng: RngStream, support=None):
    """Map a PDS instance on N vertices to ``n`` samples in dimension ``d``.

    ``support`` (planted vertices of ``g``, if known) is tracked through every
    stage into the instrumentation.
    """
    instr = Instrumentation()
    sigma_e = ctw_covariance(g, cfg, rng, support, instr)
    y = inverse_wishart_sample(sigma_e, cfg.n, rng.split(7), instr)
    z, positions = _pad_rows(y, cfg.d, rng.split(8))
    instr.embedded_rows = np.sort(positions)
    if support is not None:
        instr.record("output", np.sort(positions[instr.support("submatrix")]))
    return z, instr


# ---------------------------------------------------------------------------
# subsampling random rotations


def subsampling_random_rotations(g: Graph, cfg: SrrConfig, rng: RngStream, support=None):
    """Map a PDS instance with planted size K to a composite sparse PCA instance.

    Rows of the rotated matrix are kept independently with probability k/K.
    The instrumentation's final support is ``T``, the output rows that carry
    planted rows.
    """
    if g.n != cfg.N:
        raise InvalidParameter(f"graph has {g.n} vertices, config says N={cfg.N}")
    cfg.check_hypotheses()
    instr = Instrumentation()
    diag = Diagnostics()
    n = cfg.n
    if support is not None:
        instr.record("graph", support)

    mat, emb = to_bernoulli_submatrix(g, cfg.p, cfg.q, n, rng.split(1))
    s_n = emb.image(support) if support is not None else None
    if s_n is not None:
        instr.record("submatrix", s_n)

    rk = RkParams(cfg.p, cfg.Q, n)
    x = chi2_random_rotation(mat, cfg.K, cfg.tau, rk, rng.split(2), cfg.strict, diag)

    keep = np.flatnonzero(rng.split(3).uniform(n) < cfg.k / cfg.K)
    y, positions = _pad_rows(x[keep], cfg.d, rng.split(4))
    instr.embedded_rows = np.sort(positions)
    if s_n is not None:
        kept_planted = np.isin(keep, s_n)
        instr.record("output", np.sort(positions[kept_planted]))
    instr.absorb(diag)
    return y, instr


# ---------------------------------------------------------------------------
# sparsity cloning


def sparsity_clone_step(samples, rng: RngStream) -> np.ndarray:
    """Stack ``(X + G)/sqrt 2`` over ``(X - G)/sqrt 2`` with fresh ``G``."""
    x = np.asarray(samples, dtype=np.float64)
    gnoise = rng.normal(x.shape)
    r2 = math.sqrt(2.0)
    return np.vstack(((x + gnoise) / r2, (x - gnoise) / r2))


def sparsity_cloning(samples, ell: int, rng: RngStream, support=None,
                     budget: int = DEFAULT_MEMORY_BUDGET):
    """Apply ``ell`` cloning steps then a uniform coordinate permutation.

    Output row ``j`` is row ``perm[j]`` of the cloned matrix.
    """
    x = np.asarray(samples, dtype=np.float64)
    d, n = x.shape
    if ell < 0:
        raise InvalidParameter("ell must be nonnegative")
    if (2 ** ell) * d * n > budget:
        raise InvalidParameter(
            f"output would hold {(2 ** ell) * d * n} entries, over the budget of {budget}")
    instr = Instrumentation()
    s = None if support is None else np.asarray(support, dtype=np.int64)
    if s is not None:
        instr.record("input", s)
    for j in range(ell):
        width = x.shape[0]
        x = sparsity_clone_step(x, rng.split(j))
        if s is not None:
            s = np.concatenate((s, s + width))
    perm = uniform_permutation(x.shape[0], rng.split(ell))
    out = x[perm]
    if s is not None:
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(perm.size)
        instr.record("output", np.sort(inverse[s]))
    return out, instr
