import math

import numpy as np
import pytest

from spca_reductions.core import RngStream
from spca_reductions.errors import InvalidParameter
from spca_reductions.instances import (
    H0,
    H1,
    Graph,
    PdsParams,
    Spike,
    SpcaParams,
    draw_spike,
    gen_bernoulli_submatrix,
    gen_er_graph,
    gen_goe,
    gen_pds,
    gen_spca,
    gen_wishart,
    gw_covariance,
    gw_sample_indrep,
    read_graph,
    uniform_spike_vector,
    write_graph,
)


def test_graph_validation():
    with pytest.raises(InvalidParameter):
        Graph(2, np.array([[0, 1], [0, 0]], dtype=bool))
    with pytest.raises(InvalidParameter):
        Graph(2, np.eye(2, dtype=bool))


def test_graph_edges_and_degrees():
    g = Graph.from_edges(4, [(0, 1), (1, 2)])
    assert g.edge_count == 2
    assert list(g.degrees()) == [1, 2, 1, 0]
    assert g.edges() == [(0, 1), (1, 2)]
    assert Graph.from_upper(4, g.upper()) == g


def test_graph_text_round_trip(tmp_path):
    g = gen_er_graph(15, 0.4, RngStream(2))
    p = tmp_path / "g.txt"
    write_graph(p, g)
    lines = p.read_text().splitlines()
    assert lines[0] == f"15 {g.edge_count}"
    u, v = map(int, lines[1].split())
    assert 1 <= u < v <= 15  # 1-indexed
    assert read_graph(p) == g


def test_er_degenerate_cases():
    assert gen_er_graph(10, 0.0, RngStream(0)).edge_count == 0
    assert gen_er_graph(10, 1.0, RngStream(0)).edge_count == 45


def test_er_edge_count_mean():
    base = RngStream(1)
    counts = np.array([gen_er_graph(50, 0.5, base.split(i)).edge_count for i in range(10 ** 4)])
    se = math.sqrt(1225 * 0.25 / 10 ** 4)
    assert abs(counts.mean() - 612.5) < 4 * se


def test_pds_planted_clique():
    g, s = gen_pds(PdsParams(60, 10, 1.0, 0.5), RngStream(3))
    assert len(s) == 10
    inner = g.induced(s)
    assert inner.sum() == 90
    g, s = gen_pds(PdsParams(8, 8, 1.0, 0.5), RngStream(4))
    assert g.edge_count == 28


def test_pds_densities():
    base = RngStream(5)
    inside, outside = [], []
    for i in range(2000):
        g, s = gen_pds(PdsParams(60, 10, 1.0, 0.5), base.split(i))
        inside.append(g.induced(s).sum() // 2)
        outside.append(g.edge_count - inside[-1])
    assert set(inside) == {45}
    pairs = 60 * 59 // 2 - 45
    se = math.sqrt(0.25 / (pairs * 2000))
    assert abs(np.mean(outside) / pairs - 0.5) < 4 * se


def test_pds_rejects_bad_params():
    with pytest.raises(InvalidParameter):
        PdsParams(10, 11, 1.0, 0.5)
    with pytest.raises(InvalidParameter):
        PdsParams(10, 3, 0.4, 0.5)


def test_bernoulli_submatrix():
    m = gen_bernoulli_submatrix(6, [0, 1], 1.0, 0.3, RngStream(0))
    assert m[:2, :2].sum() == 4
    base = RngStream(6)
    s = np.arange(5)
    block, rest = 0.0, 0.0
    trials = 2000
    for i in range(trials):
        m = gen_bernoulli_submatrix(40, s, 0.9, 0.3, base.split(i)).astype(float)
        b = m[:5, :5].sum()
        block += b
        rest += m.sum() - b
    nb, nr = 25 * trials, (1600 - 25) * trials
    assert abs(block / nb - 0.9) < 4 * math.sqrt(0.09 / nb)
    assert abs(rest / nr - 0.3) < 4 * math.sqrt(0.21 / nr)


def test_ubspca_spike_values():
    spike = draw_spike(SpcaParams(100, 4, 20, 0.5), RngStream(0))
    assert np.all(spike.values == 1 / math.sqrt(4))
    assert len(set(spike.support.tolist())) == 4


@pytest.mark.parametrize("variant", ["cbspca", "fcspca"])
def test_composite_spikes(variant):
    base = RngStream(1)
    k, gamma, theta = 9, 1.0, 0.5
    for i in range(200):
        spike = draw_spike(SpcaParams(10, k, 30, theta, variant, gamma), base.split(i))
        assert k - 3 <= len(spike.support) <= k
        assert abs(spike.theta_actual - theta) <= theta * gamma / 3 + 1e-12
        assert np.linalg.norm(spike.values) == pytest.approx(1.0)
        assert np.all(np.abs(spike.values) >= 1 / math.sqrt(k) - 1e-12)


def test_spike_json_round_trip():
    spike = Spike(np.array([0, 3]), np.array([0.6, 0.8]), 0.25)
    back = Spike.from_json(spike.to_json())
    assert '"support": [1, 4]' in spike.to_json()
    assert np.array_equal(back.support, spike.support)
    assert back.theta_actual == 0.25


def test_spca_theta_zero_equals_null():
    params = SpcaParams(50, 2, 4, 0.0)
    x0, _ = gen_spca(params, H0, RngStream(3))
    x1, _ = gen_spca(params, H1, RngStream(3))
    assert np.array_equal(x0, x1)


def test_spca_covariance():
    params = SpcaParams(10 ** 5, 2, 4, 0.5)
    x, spike = gen_spca(params, H1, RngStream(4))
    v = spike.vector(4)
    target = np.eye(4) + 0.5 * np.outer(v, v)
    cov = x @ x.T / x.shape[1]
    a, b = spike.support
    se = math.sqrt((target[a, a] * target[b, b] + target[a, b] ** 2) / 1e5)
    assert abs(cov[a, b] - 0.25) < 4 * se
    se_all = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target ** 2) / 1e5)
    assert np.abs((cov - target) / se_all).max() < 5


def test_spca_negative_theta():
    params = SpcaParams(10 ** 5, 2, 3, -0.5)
    x, spike = gen_spca(params, H1, RngStream(5))
    v = spike.vector(3)
    target = np.eye(3) - 0.5 * np.outer(v, v)
    cov = x @ x.T / x.shape[1]
    se_all = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target ** 2) / 1e5)
    assert np.abs((cov - target) / se_all).max() < 5


def test_spca_bad_hypothesis():
    with pytest.raises(InvalidParameter):
        gen_spca(SpcaParams(5, 1, 2, 0.1), "H2", RngStream(0))


def test_goe():
    g = gen_goe(5, RngStream(0))
    assert np.array_equal(g, g.T)
    base = RngStream(1)
    draws = np.array([gen_goe(2, base.split(i)) for i in range(20000)])
    # diagonal variance 2, off-diagonal variance 1
    var_diag = draws[:, 0, 0].var()
    var_off = draws[:, 0, 1].var()
    assert abs(var_diag - 2) < 4 * 2 * math.sqrt(2 / 20000)
    assert abs(var_off - 1) < 4 * math.sqrt(2 / 20000)


def test_goe_scalar_variance():
    base = RngStream(2)
    x = np.array([gen_goe(1, base.split(i))[0, 0] for i in range(10 ** 5)])
    assert abs(x.var() - 2) < 4 * 2 * math.sqrt(2 / 10 ** 5)


def test_wishart_scalar_is_chi_squared():
    base = RngStream(3)
    n = 20
    x = np.array([gen_wishart(np.eye(1), n, base.split(i))[0, 0] for i in range(20000)])
    assert abs(x.mean() - n) < 4 * math.sqrt(2 * n / 20000)


def test_wishart_rank_one_and_mean():
    w = gen_wishart(np.eye(3), 1, RngStream(4))
    assert np.linalg.matrix_rank(w) == 1
    base = RngStream(5)
    ws = np.array([gen_wishart(np.eye(2), 100, base.split(i)) for i in range(10 ** 4)])
    mean = ws.mean(axis=0)
    se = np.array([[math.sqrt(200 / 1e4), math.sqrt(100 / 1e4)]] * 2)
    se[1] = se[1][::-1]
    assert np.all(np.abs(mean - 100 * np.eye(2)) < 4 * se)


def test_wishart_chunking_is_consistent():
    sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
    a = gen_wishart(sigma, 1000, RngStream(6), chunk=7)
    assert np.allclose(a, a.T)
    assert np.all(np.linalg.eigvalsh(a) > 0)


def test_gw_covariance_examples():
    s = [0, 1, 2]
    assert gw_covariance(4, 4, 4, 4, s, 3, 0.6, 7.0) == 7.0
    assert gw_covariance(0, 1, 0, 2, s, 3, 0.6, 1.0) == pytest.approx(0.24)
    assert gw_covariance(3, 4, 5, 3, s, 3, 0.6, 1.0) == 0.0


def test_gw_indrep_theta_zero_and_mean():
    base = RngStream(7)
    x = gw_sample_indrep(4.0, 3, [0], 0.0, base, size=20000)
    assert abs(x.var() - 4.0) < 0.1
    y = gw_sample_indrep(1.0, 6, [0, 1, 2], 0.5, RngStream(8), size=20000)
    sd = y.std(axis=0)
    assert np.all(np.abs(y.mean(axis=0)) < 4 * sd / math.sqrt(20000))
    single = gw_sample_indrep(1.0, 6, [0, 1, 2], 0.5, RngStream(9))
    assert single.shape == (6, 6)


def test_gw_indrep_matches_oracle_on_all_tuples():
    d, s, theta, draws = 6, [0, 1, 2], 0.5, 10 ** 5
    x = gw_sample_indrep(1.0, d, s, theta, RngStream(10), size=draws).reshape(draws, -1)
    emp = x.T @ x / draws
    se = np.sqrt(((x ** 2).T @ (x ** 2) / draws - emp ** 2) / draws)
    worst = 0.0
    for i in range(d * d):
        a, b = divmod(i, d)
        for j in range(d * d):
            c, e = divmod(j, d)
            worst = max(worst, abs(emp[i, j] - gw_covariance(a, b, c, e, s, 3, theta, 1.0)) / se[i, j])
    # 1296 tuples: 5 SE keeps the family-wise false-failure rate below 1%
    assert worst < 5


def test_uniform_spike_vector():
    v = uniform_spike_vector(5, [1, 3])
    assert np.allclose(v, [0, 1 / math.sqrt(2), 0, 1 / math.sqrt(2), 0])
    assert not uniform_spike_vector(3, []).any()
