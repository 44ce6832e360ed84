import math

import numpy as np
import pytest
from scipy import stats

from spca_reductions.core import RngStream
from spca_reductions.errors import InvalidParameter
from spca_reductions.primitives import CloneParams
from spca_reductions.verify import (
    SUITES,
    CheckReport,
    chi2_quantile,
    cloning_grid,
    covariance_deviation,
    discrete_gof,
    ks_critical,
    ks_statistic,
    mixture_identity_residual,
    normal_cdf,
    reports_to_csv,
    run_suite,
    two_sample_ks,
)


def test_mixture_identity_examples():
    assert mixture_identity_residual(CloneParams(2, 1.0, 0.5, 1.0, 2 ** -0.5)) < 1e-12
    assert mixture_identity_residual(CloneParams(2, 0.9, 0.3, 0.7, 0.5)) < 1e-12
    assert mixture_identity_residual(CloneParams(3, 1.0, 0.5, 1.0, 2 ** (-1 / 6))) < 1e-12
    assert mixture_identity_residual(CloneParams(1, 0.6, 0.2, 0.6, 0.2)) == 0.0


def test_cloning_grid_residuals():
    assert max(mixture_identity_residual(cp) for cp in cloning_grid()) < 1e-12


def test_ks_matches_scipy():
    x = RngStream(0).normal(500)
    assert ks_statistic(x, normal_cdf) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)
    y = RngStream(1).normal(300) + 0.2
    assert two_sample_ks(x, y) == pytest.approx(stats.ks_2samp(x, y).statistic, abs=1e-12)


def test_ks_examples():
    a = np.sort(RngStream(2).normal(100))
    assert two_sample_ks(a, a) == 0.0
    passes = sum(ks_statistic(RngStream(3).split(i).normal(10 ** 5), normal_cdf)
                 < 1.63 / math.sqrt(1e5) for i in range(100))
    assert passes >= 97
    x = RngStream(4).normal(10 ** 4)
    y = RngStream(5).normal(10 ** 4) + 1
    assert two_sample_ks(x, y) > 0.3
    with pytest.raises(InvalidParameter):
        ks_statistic([], normal_cdf)
    with pytest.raises(InvalidParameter):
        two_sample_ks([1.0], [])


def test_ks_critical():
    assert ks_critical(10 ** 5) == pytest.approx(1.6276 / math.sqrt(1e5), rel=1e-3)
    assert ks_critical(100, 0.01, 100) == pytest.approx(1.6276 / math.sqrt(50), rel=1e-3)


def test_discrete_gof_examples():
    pmf = np.array([0.5, 0.25, 0.25])
    assert discrete_gof([200, 100, 100], pmf) == (0.0, 2)
    assert discrete_gof([7, 0], [1.0, 0.0]) == (0.0, 0)
    with pytest.raises(InvalidParameter):
        discrete_gof([1, 2], [0.5, 0.6])


def test_discrete_gof_pools_small_cells():
    pmf = np.array([0.9, 0.09, 0.005, 0.005])
    chi2, dof = discrete_gof([90, 9, 1, 0], pmf)
    # the two tiny cells merge into the 9-cell, leaving two cells
    assert dof == 1
    assert chi2 == pytest.approx(0.0)


def test_discrete_gof_calibration():
    pmf = np.array([0.3, 0.2, 0.15, 0.1, 0.1, 0.08, 0.05, 0.02])
    base = RngStream(6)
    passes = 0
    for i in range(200):
        counts = np.bincount(base.split(i).generator.choice(8, 10 ** 5, p=pmf), minlength=8)
        chi2, dof = discrete_gof(counts, pmf)
        passes += chi2 < chi2_quantile(0.999, dof)
    assert passes >= 196


def test_covariance_deviation_examples():
    x = RngStream(7).normal((4, 10 ** 5))
    z, frob = covariance_deviation(x, np.eye(4))
    assert z < 5 and frob < 0.05
    spiked = x.copy()
    spiked[0] *= math.sqrt(1.5)
    z, _ = covariance_deviation(spiked, np.eye(4))
    assert z > 50


def test_run_suite_unknown():
    with pytest.raises(InvalidParameter):
        run_suite("nope")


def test_cloning_suite_deterministic():
    a = run_suite("cloning", 0)
    b = run_suite("cloning", 123)
    assert [r.statistic for r in a] == [r.statistic for r in b]
    assert all(r.passed for r in a)


@pytest.mark.parametrize("name", [s for s in SUITES if s != "cloning"])
def test_suites_pass_and_reproduce(name):
    first = run_suite(name, 2024)
    assert all(r.passed for r in first), [r for r in first if not r.passed]
    again = run_suite(name, 2024)
    assert first == again


def test_report_csv():
    text = reports_to_csv([CheckReport("a", 1.0, 2.0, 3, 4), CheckReport("b", 3.0, 2.0, 1, 5, 9)])
    lines = text.splitlines()
    assert lines[0] == "name,statistic,bound,passed,trials,seed,retry_seed"
    assert lines[1] == "a,1.0,2.0,true,3,4,"
    assert lines[2] == "b,3.0,2.0,false,1,5,9"
