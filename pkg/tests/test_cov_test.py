import math

import numpy as np
import pytest
from scipy import stats

from mxpbf.core_numeric import DegenerateError, InvalidInputError, SampleMatrix, cholesky, rng_stream, sample_mvn
from mxpbf.cov_test import CovTestConfig, CovTestResult, decide_cov, default_threads, log_pbf_cov, mxpbf_cov

from oracles import cov_decomposition, quadrature_log_pbf_cov


def direct_formula(n1, n2, t1, t2, t, gamma, a0=0.01, b=0.01):
    n = n1 + n2
    return (
        0.5 * math.log(gamma / (1 + gamma))
        + math.lgamma(n1 / 2 + a0) + math.lgamma(n2 / 2 + a0) - math.lgamma(n / 2 + a0)
        + math.log(b**a0 * b**a0 / (b**a0 * math.gamma(a0)))
        - (n1 / 2 + a0) * math.log(b + n1 * t1 / 2)
        - (n2 / 2 + a0) * math.log(b + n2 * t2 / 2)
        + (n / 2 + a0) * math.log(b + n * t / 2)
    )


def test_config_validation():
    cfg = CovTestConfig()
    assert (cfg.alpha, cfg.a0, cfg.b0, cfg.b01, cfg.b02) == (2.01, 0.01, 0.01, 0.01, 0.01)
    for name in ("alpha", "a0", "b0", "b01", "b02"):
        with pytest.raises(InvalidInputError):
            CovTestConfig(**{name: 0.0})
    with pytest.raises(InvalidInputError):
        CovTestConfig(b0=float("inf"))


def test_identical_populations_collapse():
    # constant regressor: slope 1.5 and residual mean square 1/6 in every fit
    xi, xj = [1.0, 2.0, 1.5], [1.0, 1.0, 1.0]
    g = 0.1
    got = log_pbf_cov(xi, xi, xj, xj, gamma=g)
    t = 1 / 6
    assert got == pytest.approx(direct_formula(3, 3, t, t, t, g), rel=1e-13)
    x = SampleMatrix(np.column_stack([[1.0, 2.0], [1.0, 1.0]]))
    with pytest.raises(InvalidInputError):
        mxpbf_cov(x, x)  # fewer than 3 rows per sample


def test_n4_hand_case_direct_evaluation():
    # the formula itself at tau1 = tau2 = tau = 0.25, n1 = n2 = 2
    g = 4.0**-2.01
    val = direct_formula(2, 2, 0.25, 0.25, 0.25, g)
    n1, n = 2, 4
    a0 = b = 0.01
    expected = (
        0.5 * math.log(g / (1 + g))
        + 2 * math.lgamma(1.01) - math.lgamma(2.01) + a0 * math.log(b) - math.lgamma(a0)
        - 2 * (n1 / 2 + a0) * math.log(b + 0.25) + (n / 2 + a0) * math.log(b + 0.5)
    )
    assert val == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("seed", range(3))
def test_quadrature_oracle_n6(seed):
    rng = np.random.default_rng(500 + seed)
    xj, yj = rng.normal(size=6), rng.normal(size=6)
    xi = 0.6 * xj + rng.normal(size=6)
    yi = -0.2 * yj + 1.7 * rng.normal(size=6)
    g = 12**-2.01
    expected = quadrature_log_pbf_cov(xi, yi, xj, yj, g)
    assert log_pbf_cov(xi, yi, xj, yj, gamma=g) == pytest.approx(expected, rel=1e-5)


def test_default_gamma_uses_two_columns():
    rng = np.random.default_rng(1)
    v = rng.normal(size=(4, 5))
    a = log_pbf_cov(v[0], v[1], v[2], v[3])
    b = log_pbf_cov(v[0], v[1], v[2], v[3], gamma=10**-2.01)
    assert a == b


def test_single_pair_errors():
    with pytest.raises(DegenerateError):
        log_pbf_cov([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0.0, 0.0, 0.0], [1.0, 1.0, 2.0])
    with pytest.raises(InvalidInputError):
        log_pbf_cov([1.0, 2.0], [1.0, 2.0], [1.0, 1.0], [1.0, 1.0])
    with pytest.raises(InvalidInputError):
        log_pbf_cov([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [1.0, 1.0], [1.0, 1.0, 1.0])


def test_planted_scale_trend():
    means = []
    for n in (50, 100, 200):
        vals = []
        for seed in range(20):
            rng = rng_stream(seed, n)
            xj, xi = rng.normal(size=(2, n))
            yj, yi = rng.normal(size=(2, n))
            vals.append(log_pbf_cov(xi, 3 * yi, xj, yj, gamma=(2 * n) ** -2.01))
        means.append(np.mean(vals))
    assert means[0] < means[1] < means[2]
    assert means[0] > 0


# -- mxPBF --------------------------------------------------------------------


def _null_pair(seed, n=100, p=10):
    rng = np.random.default_rng(seed)
    return SampleMatrix(rng.normal(size=(n, p))), SampleMatrix(rng.normal(size=(n, p)))


def test_null_monte_carlo_p10():
    below = sum(mxpbf_cov(*_null_pair(seed)).log_mxpbf < 0 for seed in range(50))
    assert below >= 45


def test_planted_entry_found_and_recomputed():
    sigma2 = np.eye(4)
    sigma2[0, 1] = sigma2[1, 0] = 0.9
    rng = np.random.default_rng(77)
    x = sample_mvn(rng, np.zeros(4), np.eye(4), 200)
    y = sample_mvn(rng, np.zeros(4), cholesky(sigma2), 200)
    res = mxpbf_cov(x, y, full_matrix=True)
    assert res.argmax_pair in {(0, 1), (1, 0)}
    i, j = res.argmax_pair
    direct = log_pbf_cov(x.column(i), y.column(i), x.column(j), y.column(j), gamma=res.gamma)
    assert res.log_mxpbf == pytest.approx(direct, rel=1e-10)
    assert res.gamma == 400**-2.01
    assert decide_cov(res)


def test_full_matrix_agrees_with_scalar_recomputation():
    x, y = _null_pair(3, n=15, p=7)
    res = mxpbf_cov(x, y, full_matrix=True, block_columns=3)
    m = res.matrix
    assert m.shape == (7, 7) and np.all(np.isnan(np.diag(m)))
    for i in range(7):
        for j in range(7):
            if i != j:
                direct = log_pbf_cov(x.column(i), y.column(i), x.column(j), y.column(j), gamma=res.gamma)
                assert m[i, j] == pytest.approx(direct, rel=1e-9, abs=1e-9)
    assert res.log_mxpbf == np.nanmax(m)
    assert res.evaluated_pairs == 42 and res.skipped_pairs == 0


def test_top_k_sorted_and_consistent():
    x, y = _null_pair(4, n=20, p=9)
    res = mxpbf_cov(x, y, top_k=5, full_matrix=True)
    vals = [v for _, v in res.top_k]
    assert len(vals) == 5 and vals == sorted(vals, reverse=True)
    assert res.top_k[0] == (res.argmax_pair, res.log_mxpbf)
    expected = np.sort(res.matrix[~np.isnan(res.matrix)])[::-1][:5]
    np.testing.assert_array_equal(vals, expected)


def test_lexicographic_tie_break():
    # two identical column pairs give tied maxima; smallest (i, j) wins
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=(2, 30))
    c, d = rng.normal(size=(2, 30))
    x = SampleMatrix(np.column_stack([a, b, a, b]))
    y = SampleMatrix(np.column_stack([c, 2 * d, c, 2 * d]))
    res = mxpbf_cov(x, y)
    tied = [pair for pair, v in res.top_k if v == res.log_mxpbf]
    assert res.argmax_pair == min(tied)


def test_pair_accounting_with_degenerate_column():
    rng = np.random.default_rng(6)
    xv, yv = rng.normal(size=(12, 5)), rng.normal(size=(10, 5))
    xv[:, 2] = 0.0
    res = mxpbf_cov(SampleMatrix(xv), SampleMatrix(yv))
    assert res.evaluated_pairs + res.skipped_pairs == 5 * 4
    assert res.skipped_pairs == 4  # column 2 cannot serve as a regressor
    assert 2 not in {j for (_, j), _ in res.top_k}


def test_all_pairs_degenerate():
    z = SampleMatrix(np.zeros((5, 3)))
    with pytest.raises(DegenerateError):
        mxpbf_cov(z, z)


def test_input_errors():
    x = SampleMatrix(np.ones((5, 1)))
    with pytest.raises(InvalidInputError):
        mxpbf_cov(x, x)
    with pytest.raises(InvalidInputError):
        mxpbf_cov(SampleMatrix(np.ones((5, 2))), SampleMatrix(np.ones((5, 3))))
    with pytest.raises(InvalidInputError):
        mxpbf_cov(*_null_pair(0, n=5, p=3), top_k=0)


def test_exact_fit_stays_finite():
    # a zero residual is cushioned by the positive inverse-gamma scale
    rng = np.random.default_rng(8)
    xj, yj = rng.normal(size=10), rng.normal(size=10)
    x = SampleMatrix(np.column_stack([2 * xj, xj]))
    y = SampleMatrix(np.column_stack([rng.normal(size=10), yj]))
    res = mxpbf_cov(x, y)
    assert res.infinite_pairs == 0 and math.isfinite(res.log_mxpbf)
    assert res.argmax_pair == (0, 1) and decide_cov(res)


def test_centering_removes_location():
    x, y = _null_pair(9, n=30, p=6)
    shifted = SampleMatrix(y.values + np.arange(6.0) * 10)
    a = mxpbf_cov(x, y, center=True)
    b = mxpbf_cov(x, shifted, center=True)
    assert a.argmax_pair == b.argmax_pair
    assert b.log_mxpbf == pytest.approx(a.log_mxpbf, rel=1e-9)


def test_decide_cov():
    res = CovTestResult(-2.0, (0, 1), [], 2, 0, 0.1)
    assert not any(decide_cov(res, c) for c in (1.0, 10.0, 1e6))
    assert decide_cov(CovTestResult(73.68, (0, 1), [], 2, 0, 0.1), 10.0)
    with pytest.raises(InvalidInputError):
        decide_cov(res, -1.0)
    rng = np.random.default_rng(0)
    batch = [CovTestResult(v, (0, 1), [], 2, 0, 0.1) for v in rng.normal(1, 2, 300)]
    assert {i for i, r in enumerate(batch) if decide_cov(r, 10)} <= {i for i, r in enumerate(batch) if decide_cov(r, 1)}


# -- invariants ---------------------------------------------------------------


def test_pooled_residual_decomposition():
    rng = np.random.default_rng(10)
    for _ in range(300):
        n1, n2 = rng.integers(3, 25, size=2)
        xi, xj = rng.normal(size=(2, n1)) * rng.uniform(0.2, 5)
        yi, yj = rng.normal(size=(2, n2)) * rng.uniform(0.2, 5)
        lhs, rhs = cov_decomposition(xi, yi, xj, yj)
        assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-10)
        assert rhs >= 0


def test_d_statistic_is_chi_square_one():
    sigma = np.array([[2.0, 0.6, 0.0], [0.6, 1.0, -0.3], [0.0, -0.3, 1.5]])
    chol = cholesky(sigma)
    pairs = [(0, 1), (1, 0), (1, 2), (2, 0), (0, 2)]
    draws = {pair: [] for pair in pairs}
    for rep in range(2000):
        rng = rng_stream(31, rep)
        x = sample_mvn(rng, np.zeros(3), chol, 12).values
        y = sample_mvn(rng, np.zeros(3), chol, 9).values
        for i, j in pairs:
            tau0 = sigma[i, i] - sigma[i, j] ** 2 / sigma[j, j]
            _, rhs = cov_decomposition(x[:, i], y[:, i], x[:, j], y[:, j])
            draws[(i, j)].append(rhs / tau0)
    for pair, d in draws.items():
        assert stats.kstest(d, stats.chi2(1).cdf).pvalue > 0.01, pair


def test_column_permutation_invariance():
    rng = np.random.default_rng(11)
    xv, yv = rng.normal(size=(40, 8)), rng.normal(size=(35, 8))
    yv[:, 5] = 2.5 * yv[:, 5] + yv[:, 1]
    perm = rng.permutation(8)
    a = mxpbf_cov(SampleMatrix(xv), SampleMatrix(yv))
    b = mxpbf_cov(SampleMatrix(xv[:, perm]), SampleMatrix(yv[:, perm]))
    assert b.log_mxpbf == pytest.approx(a.log_mxpbf, abs=1e-10)
    assert (perm[b.argmax_pair[0]], perm[b.argmax_pair[1]]) == a.argmax_pair


def test_swapping_samples_keeps_value_with_swapped_constants():
    x, y = _null_pair(12, n=25, p=5)
    a = mxpbf_cov(x, y, CovTestConfig(b01=0.02, b02=0.05))
    b = mxpbf_cov(y, x, CovTestConfig(b01=0.05, b02=0.02))
    assert b.log_mxpbf == pytest.approx(a.log_mxpbf, rel=1e-10)
    assert b.argmax_pair == a.argmax_pair


def test_thread_and_block_determinism(monkeypatch):
    x, y = _null_pair(13, n=30, p=300)
    runs = [mxpbf_cov(x, y, threads=t) for t in (1, 2, max(2, default_threads()))]
    for r in runs[1:]:
        assert r.log_mxpbf == runs[0].log_mxpbf
        assert r.argmax_pair == runs[0].argmax_pair
        assert r.top_k == runs[0].top_k
        assert (r.evaluated_pairs, r.skipped_pairs) == (runs[0].evaluated_pairs, runs[0].skipped_pairs)
    odd = mxpbf_cov(x, y, threads=3, block_columns=37)
    assert odd.log_mxpbf == pytest.approx(runs[0].log_mxpbf, rel=1e-12)
    assert odd.argmax_pair == runs[0].argmax_pair
    monkeypatch.setenv("MXPBF_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("MXPBF_THREADS", "many")
    with pytest.raises(InvalidInputError):
        default_threads()
