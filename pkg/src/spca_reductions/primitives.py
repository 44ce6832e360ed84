"""Reduction subroutines: cloning, submatrix embedding, rejection kernels,
Gaussianization and chi-square random rotations.

All entrywise kernels are vectorized over the matrix and draw from a single
stage stream in row-major order, so outputs depend only on the seed path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core.linalg import haar_orthogonal
from .core.rng import RngStream
from .core.sampling import binomial, chi_squared, uniform_permutation, uniform_subset
from .errors import InvalidParameter, soft_check
from .instances import Graph

MAX_CLONES = 16
# slack for the cloning inequalities, which hold with equality for the
# parameter choices used by the pipelines
_REL_TOL = 1e-12


def q_submatrix(p: float, q: float) -> float:
    """Target null density for the two-way clone in the submatrix embedding.

    ``1 - sqrt((1-p)(1-q))``, which reduces to ``sqrt(q)`` at ``p = 1``.
    """
    if p == 1.0:
        return math.sqrt(q)
    return 1.0 - math.sqrt((1.0 - p) * (1.0 - q))


def q_three_way(p: float, q: float) -> float:
    """Null density after the three-way clone in clique-to-Wishart.

    ``1 - (1-p)^(5/6) (1-q)^(1/6)``, which reduces to ``q^(1/6)`` at ``p = 1``.
    """
    if p == 1.0:
        return q ** (1.0 / 6.0)
    return 1.0 - (1.0 - p) ** (5.0 / 6.0) * (1.0 - q) ** (1.0 / 6.0)


@dataclass
class Diagnostics:
    """Counters accumulated while running kernels; surfaced via instrumentation."""

    rk_exhaustions: int = 0
    rk_draws: int = 0
    truncations: int = 0
    notes: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# cloning


@dataclass(frozen=True)
class CloneParams:
    t: int
    p: float
    q: float
    P: float
    Q: float

    def __post_init__(self):
        t, p, q, P, Q = self.t, self.p, self.q, self.P, self.Q
        if not 1 <= t <= MAX_CLONES:
            raise InvalidParameter(f"clone count must be in [1, {MAX_CLONES}], got {t}")
        if not 0.0 < q < p <= 1.0:
            raise InvalidParameter(f"need 0 < q < p <= 1, got p={p}, q={q}")
        if not 0.0 < Q < P <= 1.0:
            raise InvalidParameter(f"need 0 < Q < P <= 1, got P={P}, Q={Q}")
        lhs = (1.0 - p) / (1.0 - q)
        rhs = ((1.0 - P) / (1.0 - Q)) ** t
        if lhs > rhs * (1 + _REL_TOL) + 1e-300:
            raise InvalidParameter(
                f"(1-p)/(1-q) = {lhs:.6g} exceeds ((1-P)/(1-Q))^t = {rhs:.6g}")
        if (P / Q) ** t > (p / q) * (1 + _REL_TOL):
            raise InvalidParameter(f"(P/Q)^t = {(P / Q) ** t:.6g} exceeds p/q = {p / q:.6g}")


def _weights(prob: float, t: int) -> np.ndarray:
    """Bern(prob)^t mass indexed by outcome in lexicographic order."""
    ones = np.array([bin(j).count("1") for j in range(2 ** t)])
    return prob ** ones * (1.0 - prob) ** (t - ones)


def product_pmf(prob: float, t: int) -> np.ndarray:
    return _weights(prob, t)


def clone_pmf_table(source_bit: int, cp: CloneParams) -> np.ndarray:
    """Conditional law of the cloned t-vector given the source bit.

    Index ``j`` corresponds to the outcome whose clone bits are the binary
    digits of ``j``, first clone most significant.
    """
    wP = _weights(cp.P, cp.t)
    wQ = _weights(cp.Q, cp.t)
    if source_bit:
        table = (1.0 - cp.q) * wP - (1.0 - cp.p) * wQ
    else:
        table = cp.p * wQ - cp.q * wP
    return table / (cp.p - cp.q)


def outcome_index(v) -> int:
    idx = 0
    for bit in v:
        idx = (idx << 1) | int(bool(bit))
    return idx


def outcome_bits(indices, t: int) -> np.ndarray:
    """Decode outcome indices to a ``(..., t)`` bit array."""
    shifts = np.arange(t - 1, -1, -1)
    return ((np.asarray(indices)[..., None] >> shifts) & 1).astype(np.uint8)


def clone_pmf(source_bit: int, v, cp: CloneParams) -> float:
    """P[x = v | source bit] for the cloning kernel."""
    v = list(v)
    if len(v) != cp.t:
        raise InvalidParameter(f"outcome has length {len(v)}, expected t={cp.t}")
    return float(clone_pmf_table(source_bit, cp)[outcome_index(v)])


def _sampling_cdf(table: np.ndarray) -> np.ndarray:
    # roundoff can leave masses like -1e-17 at the boundary of the valid region
    clean = np.where(table < 1e-15, 0.0, table)
    cdf = np.cumsum(clean)
    return cdf / cdf[-1]


def _clone_bits(source: np.ndarray, cp: CloneParams, rng: RngStream) -> np.ndarray:
    """Sample cloned t-vectors for each source bit; returns ``source.shape + (t,)``."""
    source = np.asarray(source, dtype=bool)
    u = rng.uniform(source.shape)
    cdf0 = _sampling_cdf(clone_pmf_table(0, cp))
    cdf1 = _sampling_cdf(clone_pmf_table(1, cp))
    last = 2 ** cp.t - 1
    idx = np.where(
        source,
        np.minimum(np.searchsorted(cdf1, u, side="right"), last),
        np.minimum(np.searchsorted(cdf0, u, side="right"), last),
    )
    return outcome_bits(idx, cp.t)


def graph_clone(g: Graph, cp: CloneParams, rng: RngStream) -> list[Graph]:
    """Split one graph into ``t`` graphs whose edge slots are cloned independently."""
    bits = _clone_bits(g.upper(), cp, rng)
    return [Graph.from_upper(g.n, bits[:, j]) for j in range(cp.t)]


def bernoulli_matrix_clone(m, cp: CloneParams, rng: RngStream) -> list[np.ndarray]:
    """Cloning kernel applied to every entry of a bit matrix, diagonal included."""
    m = np.asarray(m)
    bits = _clone_bits(m, cp, rng)
    return [np.ascontiguousarray(bits[..., j]) for j in range(cp.t)]


# ---------------------------------------------------------------------------
# submatrix embedding


@dataclass(frozen=True, eq=False)
class Embedding:
    """Where each source vertex landed in the N x N output (``rows[v]``)."""

    rows: np.ndarray
    diag_in: np.ndarray
    diag_out: np.ndarray
    s1: int
    s2: int

    def image(self, vertices) -> np.ndarray:
        return np.sort(self.rows[np.asarray(vertices, dtype=np.int64)])


def to_bernoulli_submatrix(g: Graph, p: float, q: float, n_target: int, rng: RngStream):
    """Embed a graph's adjacency as a random principal minor with planted diagonal.

    Returns the ``n_target x n_target`` bit matrix and an :class:`Embedding`.
    The upper and lower halves of the minor come from two independent clones
    of ``g``; entries outside the minor are Bern(Q') with
    ``Q' = q_submatrix(p, q)``.
    """
    n = g.n
    qp = q_submatrix(p, q)
    if not n_target > p / qp * n:
        raise InvalidParameter(
            f"target dimension {n_target} must exceed (p/Q')n = {p / qp * n:.4g}")
    g1, g2 = graph_clone(g, CloneParams(2, p, q, p, qp), rng.split(0))
    s1 = binomial(n, p, rng.split(1))
    s2 = binomial(n_target, qp, rng.split(2))
    support = uniform_subset(n_target, n, rng.split(3))
    rows = support[uniform_permutation(n, rng.split(4))]
    diag_in = support[uniform_subset(n, s1, rng.split(5))]
    outside = np.setdiff1d(np.arange(n_target), support)
    # the max{s2 - s1, 0} rule can ask for more than the complement holds
    size_out = min(max(s2 - s1, 0), outside.size)
    diag_out = outside[uniform_subset(outside.size, size_out, rng.split(6))]

    mat = (rng.split(7).uniform((n_target, n_target)) < qp).astype(np.uint8)
    block = np.where(rows[:, None] < rows[None, :], g1.adj, g2.adj).astype(np.uint8)
    mat[np.ix_(rows, rows)] = block
    diag = np.zeros(n_target, dtype=np.uint8)
    diag[diag_in] = 1
    diag[diag_out] = 1
    np.fill_diagonal(mat, diag)
    return mat, Embedding(rows, diag_in, diag_out, s1, s2)


# ---------------------------------------------------------------------------
# Gaussian rejection kernel


@dataclass(frozen=True)
class RkParams:
    """Bernoulli probabilities and ambient size for the Gaussian rejection kernel.

    ``N`` sets the iteration count ``ceil(6 log(N) / delta)`` and the mean cap.
    """

    P: float
    Q: float
    N: int

    def __post_init__(self):
        if not 0.0 < self.Q < self.P <= 1.0:
            raise InvalidParameter(f"need 0 < Q < P <= 1, got P={self.P}, Q={self.Q}")
        if self.N < 2:
            raise InvalidParameter(f"need N >= 2, got {self.N}")

    @property
    def delta(self) -> float:
        a = math.log(self.P / self.Q)
        if self.P == 1.0:
            return a
        return min(a, math.log((1.0 - self.Q) / (1.0 - self.P)))

    @property
    def iters(self) -> int:
        return max(1, math.ceil(6.0 * math.log(self.N) / self.delta))

    @property
    def mu_cap(self) -> float:
        return self.delta / (2.0 * math.sqrt(6.0 * math.log(self.N) + 2.0 * math.log(1.0 / (self.P - self.Q))))


def rk_gaussian_batch(bits, mu, rk: RkParams, rng: RngStream, diag: Diagnostics | None = None) -> np.ndarray:
    """Run the Gaussian rejection kernel independently on every entry.

    Entries that exhaust ``rk.iters`` proposals output 0.
    """
    bits = np.asarray(bits).astype(bool)
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), bits.shape)
    flat_b = bits.ravel()
    flat_mu = np.ascontiguousarray(mu).ravel()
    out = np.zeros(flat_b.size)
    pending = np.arange(flat_b.size)
    log_null = math.log(rk.Q / rk.P)
    log_alt = math.log((1.0 - rk.P) / (1.0 - rk.Q)) if rk.P < 1.0 else -math.inf
    for _ in range(rk.iters):
        if pending.size == 0:
            break
        z = rng.normal(pending.size)
        u = rng.uniform(pending.size)
        b = flat_b[pending]
        m = flat_mu[pending]
        x = np.where(b, z + m, z)
        # log of the rejection ratio on each branch
        with np.errstate(over="ignore"):
            log_ratio = np.where(
                b,
                log_alt - m * x + 0.5 * m * m,
                log_null + m * x - 0.5 * m * m,
            )
            ratio = np.exp(log_ratio)
        accept = (log_ratio <= 0.0) & (u < 1.0 - ratio)
        out[pending[accept]] = x[accept]
        pending = pending[~accept]
    if diag is not None:
        diag.rk_exhaustions += int(pending.size)
        diag.rk_draws += int(flat_b.size)
    return out.reshape(bits.shape)


def rk_gaussian(b: int, mu: float, rk: RkParams, rng: RngStream, diag: Diagnostics | None = None) -> float:
    """Map one bit to an approximately N(mu*b, 1) variate."""
    soft_check(0.0 <= mu <= rk.mu_cap, f"mean {mu:.4g} outside [0, {rk.mu_cap:.4g}]")
    return float(rk_gaussian_batch(np.array([b]), np.array([mu]), rk, rng, diag)[0])


def gaussianize(m, mu, rk: RkParams, rng: RngStream, strict: bool = False,
                diag: Diagnostics | None = None) -> np.ndarray:
    """Entrywise rejection kernel with per-entry means ``mu`` (scalar or matrix)."""
    m = np.asarray(m)
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), m.shape)
    lo, hi = float(mu.min(initial=0.0)), float(mu.max(initial=0.0))
    soft_check(
        lo >= 0.0 and hi <= rk.mu_cap,
        f"gaussianize means span [{lo:.4g}, {hi:.4g}], outside [0, {rk.mu_cap:.4g}]",
        strict,
    )
    return rk_gaussian_batch(m, mu, rk, rng, diag)


def chi2_random_rotation(m, k: int, tau: float, rk: RkParams, rng: RngStream,
                         strict: bool = False, diag: Diagnostics | None = None) -> np.ndarray:
    """Gaussianize with chi-distributed column means, then rotate by a Haar matrix.

    Returns the ``N x N`` matrix whose columns are the samples.
    """
    m = np.asarray(m)
    big_n = m.shape[0]
    if m.shape != (big_n, big_n):
        raise InvalidParameter(f"expected a square matrix, got {m.shape}")
    if k < 1 or big_n % k:
        raise InvalidParameter(f"k={k} must divide the dimension {big_n}")
    soft_check(tau <= rk.mu_cap, f"tau {tau:.4g} exceeds the kernel cap {rk.mu_cap:.4g}", strict)
    ratio = big_n // k
    r = np.sqrt(chi_squared(ratio, rng.split(0), size=big_n))
    cap = 2.0 * math.sqrt(ratio)
    if diag is not None:
        diag.truncations += int(np.count_nonzero(r > cap))
    r = np.minimum(r, cap)
    col_mu = 0.5 * tau * r * math.sqrt(k / big_n)
    mu = np.broadcast_to(col_mu[None, :], m.shape)
    # the cap check was applied to tau; every column mean is at most tau
    x = rk_gaussian_batch(m, mu, rk, rng.split(1), diag)
    rot = haar_orthogonal(big_n, rng.split(2))
    return x @ rot
