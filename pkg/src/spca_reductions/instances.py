"""Instance generators for the source and target distributions.

Covers Erdos-Renyi graphs, planted dense subgraphs, planted Bernoulli
submatrices, spiked covariance sample sets, GOE and Wishart matrices, and the
jointly Gaussian ``gw`` family used to approximate planted Wishart
fluctuations.

Sample sets are ``d x n`` float arrays whose columns are samples.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core.linalg import psd_sqrt, symmetrize
from .core.rng import RngStream
from .core.sampling import uniform_subset
from .errors import InvalidParameter

VARIANTS = ("ubspca", "cbspca", "fcspca")
H0, H1 = "H0", "H1"


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on ``n`` vertices stored as a dense bool matrix."""

    n: int
    adj: np.ndarray = field(repr=False)

    def __post_init__(self):
        adj = np.asarray(self.adj, dtype=bool)
        if adj.shape != (self.n, self.n):
            raise InvalidParameter(f"adjacency shape {adj.shape} does not match n={self.n}")
        if not np.array_equal(adj, adj.T):
            raise InvalidParameter("adjacency matrix must be symmetric")
        if adj.diagonal().any():
            raise InvalidParameter("graph has self-loops")
        adj.setflags(write=False)
        object.__setattr__(self, "adj", adj)

    @classmethod
    def from_upper(cls, n: int, bits) -> "Graph":
        """Build from edge indicators listed in ``np.triu_indices(n, 1)`` order."""
        adj = np.zeros((n, n), dtype=bool)
        iu = np.triu_indices(n, 1)
        adj[iu] = np.asarray(bits, dtype=bool)
        return cls(n, adj | adj.T)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        adj = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            if u == v:
                raise InvalidParameter(f"self-loop at vertex {u}")
            adj[u, v] = adj[v, u] = True
        return cls(n, adj)

    def upper(self) -> np.ndarray:
        return self.adj[np.triu_indices(self.n, 1)]

    def edges(self) -> list[tuple[int, int]]:
        iu, ju = np.nonzero(np.triu(self.adj, 1))
        return list(zip(iu.tolist(), ju.tolist()))

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.adj, 1)))

    def degrees(self) -> np.ndarray:
        return self.adj.sum(axis=1)

    def induced(self, vertices) -> np.ndarray:
        vertices = np.asarray(vertices, dtype=np.int64)
        return self.adj[np.ix_(vertices, vertices)]

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and np.array_equal(self.adj, other.adj)

    __hash__ = None


def write_graph(path, g: Graph) -> None:
    """Text format: ``n m`` then one ``u v`` line per edge, 1-indexed."""
    edges = g.edges()
    with open(path, "w") as fh:
        fh.write(f"{g.n} {len(edges)}\n")
        for u, v in edges:
            fh.write(f"{u + 1} {v + 1}\n")


def read_graph(path) -> Graph:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise InvalidParameter(f"{path}: header must be 'n m'")
    n, m = int(lines[0][0]), int(lines[0][1])
    body = lines[1:]
    if len(body) != m:
        raise InvalidParameter(f"{path}: header declares {m} edges, found {len(body)}")
    edges = []
    for parts in body:
        u, v = int(parts[0]) - 1, int(parts[1]) - 1
        if not (0 <= u < n and 0 <= v < n):
            raise InvalidParameter(f"{path}: edge ({u + 1}, {v + 1}) out of range")
        edges.append((u, v))
    return Graph.from_edges(n, edges)


@dataclass(frozen=True)
class PdsParams:
    n: int
    k: int
    p: float
    q: float

    def __post_init__(self):
        if not 0.0 < self.q < self.p <= 1.0:
            raise InvalidParameter(f"need 0 < q < p <= 1, got p={self.p}, q={self.q}")
        if not 1 <= self.k <= self.n:
            raise InvalidParameter(f"need 1 <= k <= n, got k={self.k}, n={self.n}")


def gen_er_graph(n: int, q: float, rng: RngStream) -> Graph:
    """G(n, q): each of the C(n, 2) edges present independently."""
    if not 0.0 <= q <= 1.0:
        raise InvalidParameter(f"edge probability out of range: {q}")
    bits = rng.uniform(n * (n - 1) // 2) < q
    return Graph.from_upper(n, bits)


def gen_pds(params: PdsParams, rng: RngStream) -> tuple[Graph, np.ndarray]:
    """Planted dense subgraph G(n, k, p, q); also returns the planted support."""
    g = gen_er_graph(params.n, params.q, rng.split(0))
    support = uniform_subset(params.n, params.k, rng.split(1))
    inner = gen_er_graph(params.k, params.p, rng.split(2))
    adj = g.adj.copy()
    adj[np.ix_(support, support)] = inner.adj
    return Graph(params.n, adj), support


def gen_bernoulli_submatrix(n: int, support, p: float, q: float, rng: RngStream) -> np.ndarray:
    """n x n bit matrix with Bern(p) entries on support x support, Bern(q) elsewhere.

    The diagonal is included and the matrix is not symmetric.
    """
    if not 0.0 <= q <= 1.0 or not 0.0 <= p <= 1.0:
        raise InvalidParameter(f"probabilities out of range: p={p}, q={q}")
    support = np.asarray(support, dtype=np.int64)
    if support.size and (support.min() < 0 or support.max() >= n):
        raise InvalidParameter("support indices out of range")
    probs = np.full((n, n), q)
    probs[np.ix_(support, support)] = p
    return (rng.uniform((n, n)) < probs).astype(np.uint8)


# ---------------------------------------------------------------------------
# spiked covariance model


@dataclass(frozen=True)
class SpcaParams:
    n: int
    k: int
    d: int
    theta: float
    variant: str = "ubspca"
    gamma: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidParameter(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if not 1 <= self.k <= self.d:
            raise InvalidParameter(f"need 1 <= k <= d, got k={self.k}, d={self.d}")
        if self.n < 1:
            raise InvalidParameter(f"need n >= 1, got {self.n}")
        if not self.theta > -1.0:
            raise InvalidParameter(f"need theta > -1, got {self.theta}")
        if self.variant != "ubspca" and not self.gamma > 0:
            raise InvalidParameter("composite variants need gamma > 0")


@dataclass(frozen=True, eq=False)
class Spike:
    """A sparse unit spike ``v`` together with the signal strength used."""

    support: np.ndarray
    values: np.ndarray
    theta_actual: float

    def vector(self, d: int) -> np.ndarray:
        v = np.zeros(d)
        v[self.support] = self.values
        return v

    def to_json(self) -> str:
        return json.dumps({
            "support": [int(i) + 1 for i in self.support],
            "values": [float(x) for x in self.values],
            "theta": float(self.theta_actual),
        })

    @classmethod
    def from_json(cls, text: str) -> "Spike":
        obj = json.loads(text)
        return cls(
            np.asarray(obj["support"], dtype=np.int64) - 1,
            np.asarray(obj["values"], dtype=np.float64),
            float(obj["theta"]),
        )


def uniform_spike_vector(d: int, support) -> np.ndarray:
    """``v_S``: 1/sqrt(|S|) on the support, zero elsewhere."""
    support = np.asarray(support, dtype=np.int64)
    v = np.zeros(d)
    if support.size:
        v[support] = 1.0 / math.sqrt(support.size)
    return v


def draw_spike(params: SpcaParams, rng: RngStream) -> Spike:
    """Sample a spike from the variant's hypothesis class.

    ``cbspca`` and ``fcspca`` draw the signal uniformly from the allowed
    interval and the support size uniformly from ``k - ceil(gamma sqrt k) .. k``.
    ``fcspca`` additionally attaches uniform random signs.
    """
    k, d = params.k, params.d
    if params.variant == "ubspca":
        support = uniform_subset(d, k, rng.split(0))
        return Spike(support, np.full(k, 1.0 / math.sqrt(k)), float(params.theta))

    slack = params.gamma / math.sqrt(k)
    lo, hi = params.theta * (1 - slack), params.theta * (1 + slack)
    theta = float(lo + (hi - lo) * rng.split(1).uniform())
    k_min = max(1, k - math.ceil(params.gamma * math.sqrt(k)))
    k_actual = int(rng.split(2).integers(k_min, k + 1))
    support = uniform_subset(d, k_actual, rng.split(0))
    values = np.full(k_actual, 1.0 / math.sqrt(k))
    if params.variant == "fcspca":
        values = values * np.where(rng.split(3).uniform(k_actual) < 0.5, -1.0, 1.0)
    values = values / np.linalg.norm(values)
    return Spike(support, values, theta)


def gen_spca(params: SpcaParams, hypothesis: str, rng: RngStream) -> tuple[np.ndarray, Optional[Spike]]:
    """Draw a ``d x n`` sample set under H0 or H1.

    Under H1 each column is ``sqrt(theta') g_i v + z_i`` with independent
    standard normal ``g_i`` and ``z_i``, which has covariance
    ``I + theta' v v^T``.
    """
    if hypothesis not in (H0, H1):
        raise InvalidParameter(f"hypothesis must be 'H0' or 'H1', got {hypothesis!r}")
    noise = rng.split(0).normal((params.d, params.n))
    if hypothesis == H0:
        return noise, None
    spike = draw_spike(params, rng.split(1))
    v = spike.vector(params.d)
    theta = spike.theta_actual
    if theta >= 0:
        g = rng.split(2).normal(params.n)
        return noise + math.sqrt(theta) * np.outer(v, g), spike
    root = psd_sqrt(np.eye(params.d) + theta * np.outer(v, v))
    return root @ noise, spike


# ---------------------------------------------------------------------------
# random matrix ensembles


def gen_goe(d: int, rng: RngStream) -> np.ndarray:
    """GOE(d) as (A + A^T)/sqrt(2): diagonal variance 2, off-diagonal variance 1."""
    if d < 1:
        raise InvalidParameter(f"need d >= 1, got {d}")
    a = rng.normal((d, d))
    return (a + a.T) / math.sqrt(2.0)


def gen_wishart(sigma, n: int, rng: RngStream, chunk: int = 8192) -> np.ndarray:
    """W_n(Sigma): sum of ``n`` outer products of N(0, Sigma) columns.

    Columns are generated in blocks of ``chunk`` and accumulated, so the full
    ``d x n`` sample matrix is never held in memory.
    """
    if n < 1:
        raise InvalidParameter(f"need n >= 1, got {n}")
    root = psd_sqrt(sigma)
    d = root.shape[0]
    w = np.zeros((d, d))
    done = 0
    while done < n:
        c = min(chunk, n - done)
        x = root @ rng.normal((d, c))
        w += x @ x.T
        done += c
    return symmetrize(w)


def gw_covariance(a: int, b: int, c: int, e: int, support, k: int, theta: float, n: float) -> float:
    """E[X_ab X_ce] for X ~ gw_d(n, S, theta)."""
    s = set(int(i) for i in support)
    left = (a == c) + (theta / k) * (a in s and c in s)
    right = (b == e) + (theta / k) * (b in s and e in s)
    return float(n * left * right)


def gw_sample_indrep(n: float, d: int, support, theta: float, rng: RngStream, size=None) -> np.ndarray:
    """Draw from gw_d(n, S, theta) via its four-term independent representation.

    ``sqrt(n) * (W + sqrt(theta) v w1^T + sqrt(theta) w2 v^T + theta g v v^T)``.
    With ``size`` set, returns a ``(size, d, d)`` stack of independent draws.
    """
    if theta < 0:
        raise InvalidParameter(f"need theta >= 0, got {theta}")
    v = uniform_spike_vector(d, support)
    batch = 1 if size is None else int(size)
    w = rng.normal((batch, d, d))
    w1 = rng.normal((batch, d))
    w2 = rng.normal((batch, d))
    g = rng.normal(batch)
    rt = math.sqrt(theta)
    x = (
        w
        + rt * v[None, :, None] * w1[:, None, :]
        + rt * w2[:, :, None] * v[None, None, :]
        + theta * g[:, None, None] * np.outer(v, v)[None]
    )
    x *= math.sqrt(n)
    return x[0] if size is None else x
