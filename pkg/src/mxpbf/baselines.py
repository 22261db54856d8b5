"""Frequentist two-sample tests used as comparators.

Mean tests: Bai & Saranadasa (1996), Srivastava & Du (2008).
Covariance tests: Schott (2007), Li & Chen (2012, plug-in version) and the
maximum-type test of Cai, Liu & Xia (2013).

Trace quantities are computed from ``n x n`` Gram matrices so nothing of
size ``p x p`` is formed.  The L2-type statistics are standardised to
N(0, 1) under H0 and use the upper tail; the max-type statistic uses its
Gumbel-type limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats

from .core_numeric import InvalidInputError, SampleMatrix

DEFAULT_LEVEL = 0.05


class Method(str, Enum):
    BS = "BS"
    SD = "SD"
    SCHOTT = "Schott"
    LC = "LC"
    CLX_COV = "CLXcov"


@dataclass(frozen=True)
class FreqTestResult:
    statistic: float
    p_value: float
    method: Method

    def reject(self, level: float = DEFAULT_LEVEL) -> bool:
        return self.p_value < level


def _check_pair(x: SampleMatrix, y: SampleMatrix, min_n: int = 2):
    if x.p != y.p:
        raise InvalidInputError(f"column counts differ: {x.p} vs {y.p}")
    if x.n < min_n or y.n < min_n:
        raise InvalidInputError(f"each sample needs at least {min_n} rows, got {x.n} and {y.n}")


def _upper_normal(z: float) -> float:
    return float(stats.norm.sf(z))


def _fro2(a: np.ndarray) -> float:
    return float(np.einsum("ij,ij->", a, a))


def _pooled_deviations(x: SampleMatrix, y: SampleMatrix):
    wx = x.values - x.values.mean(axis=0)
    wy = y.values - y.values.mean(axis=0)
    return np.vstack([wx, wy])


def bs_mean_test(x: SampleMatrix, y: SampleMatrix) -> FreqTestResult:
    _check_pair(x, y)
    n1, n2 = x.n, y.n
    big_n = n1 + n2 - 2
    if big_n < 3:
        raise InvalidInputError("n1 + n2 - 2 must be at least 3")
    w = _pooled_deviations(x, y)
    tr_s = _fro2(w) / big_n
    tr_s2 = _fro2(w @ w.T) / big_n**2
    diff = x.values.mean(axis=0) - y.values.mean(axis=0)
    b2 = big_n**2 / ((big_n + 2) * (big_n - 1)) * (tr_s2 - tr_s**2 / big_n)
    num = n1 * n2 / (n1 + n2) * float(diff @ diff) - tr_s
    z = num / math.sqrt(2 * (big_n + 1) / big_n * b2)
    return FreqTestResult(z, _upper_normal(z), Method.BS)


def sd_mean_test(x: SampleMatrix, y: SampleMatrix) -> FreqTestResult:
    _check_pair(x, y)
    n1, n2, p = x.n, y.n, x.p
    big_n = n1 + n2 - 2
    if big_n < 3:
        raise InvalidInputError("n1 + n2 - 2 must be at least 3")
    w = _pooled_deviations(x, y)
    d = np.einsum("ij,ij->j", w, w) / big_n
    if np.any(d <= 0):
        raise InvalidInputError("a column has zero pooled variance")
    ws = w / np.sqrt(d)
    tr_r2 = _fro2(ws @ ws.T) / big_n**2
    diff = x.values.mean(axis=0) - y.values.mean(axis=0)
    t1 = n1 * n2 / (n1 + n2) * float(np.sum(diff * diff / d))
    c_pn = 1 + tr_r2 / p**1.5
    z = (t1 - big_n * p / (big_n - 2)) / math.sqrt(2 * (tr_r2 - p * p / big_n) * c_pn)
    return FreqTestResult(z, _upper_normal(z), Method.SD)


def schott_cov_test(x: SampleMatrix, y: SampleMatrix) -> FreqTestResult:
    """Standardised unbiased estimate of ``||Sigma1 - Sigma2||_F^2``."""
    _check_pair(x, y, min_n=4)
    m1, m2 = x.n - 1, y.n - 1
    w1 = x.values - x.values.mean(axis=0)
    w2 = y.values - y.values.mean(axis=0)
    tr1, tr2 = _fro2(w1) / m1, _fro2(w2) / m2
    tr11 = _fro2(w1 @ w1.T) / m1**2
    tr22 = _fro2(w2 @ w2.T) / m2**2
    tr12 = _fro2(w1 @ w2.T) / (m1 * m2)
    eta1 = (m1 + 2) * (m1 - 1)
    eta2 = (m2 + 2) * (m2 - 1)
    t = (
        (1 - (m1 - 2) / eta1) * tr11
        + (1 - (m2 - 2) / eta2) * tr22
        - 2 * tr12
        - m1 / eta1 * tr1**2
        - m2 / eta2 * tr2**2
    )
    m = m1 + m2
    tr_pool = (tr1 * m1 + tr2 * m2) / m
    w = np.vstack([w1, w2])
    tr_pool2 = _fro2(w @ w.T) / m**2
    a2 = m * m / ((m + 2) * (m - 1)) * (tr_pool2 - tr_pool**2 / m)
    z = t / (2 * a2 * (1 / m1 + 1 / m2))
    return FreqTestResult(z, _upper_normal(z), Method.SCHOTT)


def lc_trace_estimates(x: SampleMatrix, y: SampleMatrix) -> tuple[float, float, float]:
    """Plug-in estimates of ``tr(S1^2)``, ``tr(S2^2)`` and ``tr(S1 S2)``.

    These are the U-statistics of Li & Chen with the mean-correction terms
    dropped, which makes them O(n^2 p) instead of O(n^4 p); they are unbiased
    when both populations have zero mean and biased otherwise.
    """
    xv, yv = x.values, y.values
    n1, n2 = x.n, y.n
    gx = xv @ xv.T
    gy = yv @ yv.T
    a1 = (_fro2(gx) - float(np.sum(np.diag(gx) ** 2))) / (n1 * (n1 - 1))
    a2 = (_fro2(gy) - float(np.sum(np.diag(gy) ** 2))) / (n2 * (n2 - 1))
    c = _fro2(xv @ yv.T) / (n1 * n2)
    return a1, a2, c


def lc_cov_test(x: SampleMatrix, y: SampleMatrix) -> FreqTestResult:
    _check_pair(x, y, min_n=4)
    n1, n2 = x.n, y.n
    a1, a2, c = lc_trace_estimates(x, y)
    t = a1 + a2 - 2 * c
    sd = 2 * a1 / n2 + 2 * a2 / n1
    if not sd > 0:
        raise InvalidInputError("degenerate data: estimated variance is not positive")
    z = t / sd
    return FreqTestResult(z, _upper_normal(z), Method.LC)


def _clx_block(w1, w2, cols, n1, n2):
    s1 = w1.T @ w1[:, cols] / n1
    s2 = w2.T @ w2[:, cols] / n2
    q1 = w1 * w1
    q2 = w2 * w2
    # theta = mean of (w_i w_j)^2 minus s_ij^2
    th1 = q1.T @ q1[:, cols] / n1 - s1 * s1
    th2 = q2.T @ q2[:, cols] / n2 - s2 * s2
    den = th1 / n1 + th2 / n2
    d = s1 - s2
    with np.errstate(divide="ignore", invalid="ignore"):
        m = d * d / den
    p = w1.shape[1]
    rows = np.arange(p)[:, None]
    upper = rows <= cols[None, :]
    return np.where(upper & (den > 0), m, np.nan)


def clx_statistic_matrix(x: SampleMatrix, y: SampleMatrix) -> np.ndarray:
    """All standardised squared differences at once (``i <= j``; NaN elsewhere)."""
    w1 = x.values - x.values.mean(axis=0)
    w2 = y.values - y.values.mean(axis=0)
    return _clx_block(w1, w2, np.arange(x.p), x.n, y.n)


def clx_statistic(x: SampleMatrix, y: SampleMatrix, block_columns: int = 128) -> float:
    """Maximum standardised squared difference, streamed over column blocks."""
    w1 = x.values - x.values.mean(axis=0)
    w2 = y.values - y.values.mean(axis=0)
    best = -np.inf
    for start in range(0, x.p, block_columns):
        cols = np.arange(start, min(start + block_columns, x.p))
        block = _clx_block(w1, w2, cols, x.n, y.n)
        if np.all(np.isnan(block)):
            continue
        best = max(best, float(np.nanmax(block)))
    return best


def clx_p_value(m: float, p: int) -> float:
    """Upper tail of the limit law ``exp(-(8 pi)^-1/2 exp(-t/2))``."""
    t = m - 4 * math.log(p) + math.log(math.log(p))
    return float(-math.expm1(-math.exp(-t / 2) / math.sqrt(8 * math.pi)))


def clx_cov_test(x: SampleMatrix, y: SampleMatrix) -> FreqTestResult:
    _check_pair(x, y, min_n=4)
    if x.p < 2:
        raise InvalidInputError("need at least 2 columns")
    m = clx_statistic(x, y)
    if m == -np.inf:
        raise InvalidInputError("every pair has a zero variance estimate")
    return FreqTestResult(m, clx_p_value(m, x.p), Method.CLX_COV)


MEAN_TESTS = {"bs": bs_mean_test, "sd": sd_mean_test}
COV_TESTS = {"sch": schott_cov_test, "lc": lc_cov_test, "clx": clx_cov_test}
