"""Numerical kernels shared by the two-sample tests.

Column summaries and projection residuals use the divisor-n convention
(``css / n``) everywhere; nothing here ever switches to ``n - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

__all__ = [
    "MxpbfError",
    "InvalidInputError",
    "DegenerateError",
    "NotPositiveDefiniteError",
    "NumericalError",
    "SampleMatrix",
    "ColumnSummary",
    "PairRegression",
    "column_summary",
    "column_summaries",
    "pair_regression",
    "log_gamma",
    "cholesky",
    "rng_stream",
    "sample_mvn",
]


class MxpbfError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(MxpbfError, ValueError):
    pass


class DegenerateError(MxpbfError, ArithmeticError):
    """A column (or every column) carries no spread to test with."""


class NotPositiveDefiniteError(MxpbfError, np.linalg.LinAlgError):
    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"matrix is not positive definite (pivot {index})")


class NumericalError(MxpbfError, ArithmeticError):
    pass


@dataclass(frozen=True)
class SampleMatrix:
    """An ``n x p`` data matrix, one row per observation.

    Values are stored column-major so ``column(j)`` is a contiguous view.
    """

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise InvalidInputError(f"non-finite entry at row {bad[0]}, column {bad[1]}")
        arr = np.array(arr, dtype=np.float64, order="F", copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def centered(self) -> "SampleMatrix":
        """Subtract each column's mean."""
        return SampleMatrix(self.values - self.values.mean(axis=0))

    def __repr__(self):
        return f"SampleMatrix(n={self.n}, p={self.p})"


@dataclass(frozen=True)
class ColumnSummary:
    mean: float
    css: float


@dataclass(frozen=True)
class PairRegression:
    ahat: float
    tauhat: float
    clamped: bool = False


def column_summary(v) -> ColumnSummary:
    """Mean and centered sum of squares of ``v`` by the two-pass algorithm."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidInputError("empty vector")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("non-finite entries")
    means, css = column_summaries(v[:, None])
    return ColumnSummary(mean=float(means[0]), css=float(css[0]))


def column_summaries(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`column_summary` over the columns of ``m``."""
    m = np.asarray(m, dtype=np.float64)
    means = m.mean(axis=0)
    dev = m - means
    css = np.einsum("ij,ij->j", dev, dev)
    # a constant column must report exactly zero spread; its rounded mean may not
    const = np.all(m == m[:1], axis=0)
    means[const] = m[0, const]
    css[const] = 0.0
    return means, css


def pair_regression(vi, vj) -> PairRegression:
    """Regress ``vi`` on ``vj`` through the origin.

    Returns the slope and the residual mean square ``||vi - a vj||^2 / n``.
    A residual that comes out negative from cancellation is clamped to zero
    and reported through ``clamped``.
    """
    vi = np.asarray(vi, dtype=np.float64).ravel()
    vj = np.asarray(vj, dtype=np.float64).ravel()
    if vi.size != vj.size or vi.size < 2:
        raise InvalidInputError(f"need equal lengths >= 2, got {vi.size} and {vj.size}")
    njj = float(vj @ vj)
    if njj <= 0.0:
        raise DegenerateError("regressor column is identically zero")
    cross = float(vi @ vj)
    nii = float(vi @ vi)
    rss = nii - cross * cross / njj
    clamped = rss < 0.0
    if clamped:
        rss = 0.0
    return PairRegression(ahat=cross / njj, tauhat=rss / vi.size, clamped=clamped)


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for ``x > 0``."""
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise InvalidInputError(f"log_gamma needs a finite positive argument, got {x}")
    return math.lgamma(x)


def cholesky(m) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises :class:`NotPositiveDefiniteError` carrying the 0-based index of
    the first non-positive pivot.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10 * scale):
        raise InvalidInputError("matrix is not symmetric")
    factor, info = lapack.dpotrf(m, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise NumericalError(f"dpotrf: illegal argument {-info}")
    return np.tril(factor)


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *key)``.

    Streams for different keys never depend on the order in which they are
    requested, so replicates can be built in any order or in parallel.
    """
    seq = np.random.SeedSequence(entropy=int(seed) % (1 << 64), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def sample_mvn(rng: np.random.Generator, mu, chol, count: int) -> SampleMatrix:
    """Draw ``count`` rows from ``N(mu, chol @ chol.T)``."""
    mu = np.asarray(mu, dtype=np.float64).ravel()
    chol = np.asarray(chol, dtype=np.float64)
    if chol.ndim != 2 or chol.shape != (mu.size, mu.size):
        raise InvalidInputError(f"mean has length {mu.size} but factor has shape {chol.shape}")
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    z = rng.standard_normal((count, mu.size))
    return SampleMatrix(z @ chol.T + mu)
