"""Seeded simulation designs for the mean and covariance comparisons.

Mean designs: ``X ~ N(0, Sigma0)``, ``Y ~ N(mu02, Sigma0)`` where the
precision matrix ``Omega0 = Sigma0^-1`` is sparse (1% of off-diagonal
positions set to 0.3) or dense (40%), and ``mu02`` carries ``n0`` planted
signals of size ``mu`` (``n0 = 5`` rare, ``n0 = p / 2`` many).

Covariance designs: ``X ~ N(0, Sigma01)``, ``Y ~ N(0, Sigma02)`` with
``Sigma02 = Sigma01 + U``.  Rare signals put five ``Unif(0, rho)`` values
in the lower triangle of ``U``; many signals use ``U = u u^T`` with
``u_j ~ Unif(0, rho)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve

from .core_numeric import (
    InvalidInputError,
    NotPositiveDefiniteError,
    NumericalError,
    SampleMatrix,
    cholesky,
    rng_stream,
    sample_mvn,
)

# Stream keys under the scenario seed.
TRUTH_STREAM = 0
DATA_STREAM = 1


class Kind(str, Enum):
    MEAN_H0 = "MeanH0"
    MEAN_H1R = "MeanH1R"
    MEAN_H1M = "MeanH1M"
    COV_H0 = "CovH0"
    COV_H1R = "CovH1R"
    COV_H1M = "CovH1M"

    @property
    def is_mean(self) -> bool:
        return self.value.startswith("Mean")

    @property
    def is_null(self) -> bool:
        return self.value.endswith("H0")

    def null_kind(self) -> "Kind":
        return Kind.MEAN_H0 if self.is_mean else Kind.COV_H0


class Structure(str, Enum):
    SPARSE_OMEGA = "SparseOmega"
    DENSE_OMEGA = "DenseOmega"
    SPARSE_SIGMA = "SparseSigma"
    DENSE_SIGMA = "DenseSigma"

    @property
    def is_mean(self) -> bool:
        return self.value.endswith("Omega")


MEAN_H1R_GRID = (0.2, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.8, 1.0, 1.5)
MEAN_H1M_GRID = (0.025, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6)
COV_H1R_GRID = (0.5, 0.8, 1.5, 3.0, 6.0, 15.0)
COV_H1M_GRID = (0.2, 0.3, 0.5, 0.7, 1.0, 1.5)

SIGNAL_GRIDS = {
    Kind.MEAN_H1R: MEAN_H1R_GRID,
    Kind.MEAN_H1M: MEAN_H1M_GRID,
    Kind.COV_H1R: COV_H1R_GRID,
    Kind.COV_H1M: COV_H1M_GRID,
}

RARE_SIGNALS = 5
OMEGA_ENTRY = 0.3
OMEGA_SPARSE_FRACTION = 0.01
OMEGA_DENSE_FRACTION = 0.40
OMEGA_PD_MARGIN = 0.1**3
DELTA_ENTRY = 0.5
DELTA_FRACTION = 0.05
COV_PD_MARGIN = 0.05


@dataclass(frozen=True)
class ScenarioSpec:
    kind: Kind
    structure: Structure
    n: int = 100
    p: int = 100
    signal: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "structure", Structure(self.structure))
        if self.kind.is_mean != self.structure.is_mean:
            raise InvalidInputError(f"structure {self.structure.value} does not fit {self.kind.value}")
        if self.n < 2 or self.p < 2:
            raise InvalidInputError("n and p must be at least 2")
        if not self.kind.is_null and not self.signal > 0:
            raise InvalidInputError("alternative scenarios need a positive signal")
        if self.kind == Kind.MEAN_H1M and self.p % 2:
            raise InvalidInputError("the many-signals mean design needs an even p")

    @property
    def n_signals(self) -> int:
        if self.kind == Kind.MEAN_H1R:
            return RARE_SIGNALS
        if self.kind == Kind.MEAN_H1M:
            return self.p // 2
        return 0

    def as_null(self) -> "ScenarioSpec":
        return replace(self, kind=self.kind.null_kind(), signal=0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["structure"] = self.structure.value
        return d

    def dumps(self) -> str:
        """Flat ``key=value`` lines."""
        return "".join(f"{k}={v}\n" for k, v in self.to_dict().items())

    @classmethod
    def loads(cls, text: str) -> "ScenarioSpec":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInputError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise InvalidInputError(f"line {lineno}: unknown key {key!r}")
            if key in ("n", "p", "seed"):
                kwargs[key] = int(value)
            elif key == "signal":
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        return cls.loads(Path(path).read_text())


PRESETS = {
    "mean-h0-sparse": (Kind.MEAN_H0, Structure.SPARSE_OMEGA),
    "mean-h0-dense": (Kind.MEAN_H0, Structure.DENSE_OMEGA),
    "mean-h1r-sparse": (Kind.MEAN_H1R, Structure.SPARSE_OMEGA),
    "mean-h1r-dense": (Kind.MEAN_H1R, Structure.DENSE_OMEGA),
    "mean-h1m-sparse": (Kind.MEAN_H1M, Structure.SPARSE_OMEGA),
    "mean-h1m-dense": (Kind.MEAN_H1M, Structure.DENSE_OMEGA),
    "cov-h0-sparse": (Kind.COV_H0, Structure.SPARSE_SIGMA),
    "cov-h0-dense": (Kind.COV_H0, Structure.DENSE_SIGMA),
    "cov-h1r-sparse": (Kind.COV_H1R, Structure.SPARSE_SIGMA),
    "cov-h1r-dense": (Kind.COV_H1R, Structure.DENSE_SIGMA),
    "cov-h1m-sparse": (Kind.COV_H1M, Structure.SPARSE_SIGMA),
    "cov-h1m-dense": (Kind.COV_H1M, Structure.DENSE_SIGMA),
}


def preset(name: str, **overrides) -> ScenarioSpec:
    try:
        kind, structure = PRESETS[name]
    except KeyError:
        raise InvalidInputError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return ScenarioSpec(kind=kind, structure=structure, **overrides)


@dataclass
class GroundTruth:
    kind: Kind
    mu1: np.ndarray
    mu2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    signal_support: list = field(default_factory=list)
    omega: np.ndarray | None = None
    u: np.ndarray | None = None
    pd_shift: float = 0.0


def smallest_eigenvalue(m, *, rtol: float = 1e-10, max_iter: int = 200) -> float:
    """Smallest eigenvalue of a symmetric matrix by Cholesky bisection.

    ``m - s I`` is positive definite exactly when ``s < lambda_min``, so the
    Gershgorin interval is halved until it is below ``rtol`` times the
    matrix scale.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10 * max(scale, 1.0)):
        raise InvalidInputError("matrix is not symmetric")
    if scale == 0.0:
        return 0.0
    m = (m + m.T) / 2
    diag = np.diag(m)
    radius = np.sum(np.abs(m), axis=1) - np.abs(diag)
    lo = float(np.min(diag - radius))
    hi = float(np.min(diag))
    tol = rtol * scale
    eye = np.eye(m.shape[0])
    for _ in range(max_iter):
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        try:
            cholesky(m - mid * eye)
            lo = mid
        except NotPositiveDefiniteError:
            hi = mid
    raise NumericalError(f"bisection did not converge: interval [{lo}, {hi}] after {max_iter} steps")


def _plant_symmetric(rng: np.random.Generator, p: int, fraction: float, value: float) -> np.ndarray:
    """Zero-diagonal symmetric matrix with ``value`` at a random ``fraction`` of off-diagonal pairs."""
    rows, cols = np.tril_indices(p, k=-1)
    count = int(round(fraction * rows.size))
    pick = rng.choice(rows.size, size=count, replace=False)
    out = np.zeros((p, p))
    out[rows[pick], cols[pick]] = value
    out[cols[pick], rows[pick]] = value
    return out


def _spd_inverse(m: np.ndarray) -> np.ndarray:
    chol = cholesky(m)
    inv = cho_solve((chol, True), np.eye(m.shape[0]))
    return (inv + inv.T) / 2


def build_mean_truth(spec: ScenarioSpec, rng: np.random.Generator) -> GroundTruth:
    if not spec.kind.is_mean:
        raise InvalidInputError(f"{spec.kind.value} is not a mean scenario")
    p = spec.p
    fraction = OMEGA_SPARSE_FRACTION if spec.structure == Structure.SPARSE_OMEGA else OMEGA_DENSE_FRACTION
    omega = np.eye(p) + _plant_symmetric(rng, p, fraction, OMEGA_ENTRY)
    lam = smallest_eigenvalue(omega)
    shift = 0.0
    if lam <= 0:
        shift = -lam + OMEGA_PD_MARGIN
        omega = omega + shift * np.eye(p)
    sigma = _spd_inverse(omega)

    mu1 = np.zeros(p)
    mu2 = np.zeros(p)
    support: list = []
    if not spec.kind.is_null:
        support = sorted(int(j) for j in rng.choice(p, size=spec.n_signals, replace=False))
        mu2[support] = spec.signal
    return GroundTruth(spec.kind, mu1, mu2, sigma, sigma, support, omega=omega, pd_shift=shift)


def dense_delta(p: int) -> np.ndarray:
    """``delta_ij = (-1)^(i+j) * 0.4 ** (|i-j| ** 0.1)``."""
    idx = np.arange(p)
    gap = np.abs(idx[:, None] - idx[None, :]).astype(float)
    sign = np.where((idx[:, None] + idx[None, :]) % 2 == 0, 1.0, -1.0)
    return sign * 0.4 ** (gap**0.1)


def build_cov_truth(spec: ScenarioSpec, rng: np.random.Generator) -> GroundTruth:
    if spec.kind.is_mean:
        raise InvalidInputError(f"{spec.kind.value} is not a covariance scenario")
    p = spec.p
    if spec.structure == Structure.SPARSE_SIGMA:
        delta1 = _plant_symmetric(rng, p, DELTA_FRACTION, DELTA_ENTRY)
        delta = delta1 + (abs(smallest_eigenvalue(delta1)) + COV_PD_MARGIN) * np.eye(p)
        root_d = np.sqrt(rng.uniform(0.5, 2.5, size=p))
        sigma1 = root_d[:, None] * delta * root_d[None, :]
    else:
        o = rng.uniform(1.0, 5.0, size=p)
        sigma1 = o[:, None] * dense_delta(p) * o[None, :]

    u = np.zeros((p, p))
    support: list = []
    if spec.kind == Kind.COV_H1R:
        rows, cols = np.tril_indices(p)
        pick = rng.choice(rows.size, size=RARE_SIGNALS, replace=False)
        vals = rng.uniform(0.0, spec.signal, size=RARE_SIGNALS)
        for k, v in zip(pick, vals):
            i, j = int(rows[k]), int(cols[k])
            u[i, j] += v
            if i != j:
                u[j, i] += v
            support.append((i, j))
        support.sort()
    elif spec.kind == Kind.COV_H1M:
        vec = rng.uniform(0.0, spec.signal, size=p)
        u = np.outer(vec, vec)
        support = [(i, j) for i in range(p) for j in range(i + 1)]
    sigma2 = sigma1 + u if spec.kind != Kind.COV_H0 else sigma1

    shift = 0.0
    lam = min(smallest_eigenvalue(sigma1), smallest_eigenvalue(sigma2))
    if lam <= 0:
        shift = abs(lam) + COV_PD_MARGIN
        sigma1 = sigma1 + shift * np.eye(p)
        sigma2 = sigma1 if spec.kind == Kind.COV_H0 else sigma2 + shift * np.eye(p)
    zeros = np.zeros(p)
    return GroundTruth(spec.kind, zeros, zeros.copy(), sigma1, sigma2, support, u=u, pd_shift=shift)


def build_truth(spec: ScenarioSpec, rng: np.random.Generator) -> GroundTruth:
    return build_mean_truth(spec, rng) if spec.kind.is_mean else build_cov_truth(spec, rng)


def truth_for(spec: ScenarioSpec) -> GroundTruth:
    """Ground truth drawn from the spec's own seed."""
    return build_truth(spec, rng_stream(spec.seed, TRUTH_STREAM))


def generate_dataset(truth: GroundTruth, spec: ScenarioSpec, rng_x, rng_y=None) -> tuple[SampleMatrix, SampleMatrix]:
    """Draw ``n`` rows per population.

    ``rng_y`` defaults to ``rng_x``; pass separate streams when the two
    populations must not depend on each other's draw count.
    """
    p = truth.sigma1.shape[0]
    if spec.p != p:
        raise InvalidInputError(f"spec has p={spec.p} but truth has p={p}")
    chol1 = cholesky(truth.sigma1)
    chol2 = chol1 if truth.sigma2 is truth.sigma1 else cholesky(truth.sigma2)
    x = sample_mvn(rng_x, truth.mu1, chol1, spec.n)
    y = sample_mvn(rng_y if rng_y is not None else rng_x, truth.mu2, chol2, spec.n)
    return x, y


def replicate(truth: GroundTruth, spec: ScenarioSpec, index: int, hypothesis: int = 0):
    """Dataset ``index`` of an experiment; ``hypothesis`` keeps H0 and H1 streams apart."""
    return generate_dataset(
        truth,
        spec,
        rng_stream(spec.seed, DATA_STREAM, hypothesis, index, 0),
        rng_stream(spec.seed, DATA_STREAM, hypothesis, index, 1),
    )


def pd_check(m: np.ndarray) -> bool:
    try:
        cholesky(m)
    except NotPositiveDefiniteError:
        return False
    return True


def signal_grid(kind: Kind) -> tuple:
    return SIGNAL_GRIDS.get(Kind(kind), ())


def describe(spec: ScenarioSpec) -> str:
    sig = "" if spec.kind.is_null else f", signal={spec.signal:g}"
    return f"{spec.kind.value}/{spec.structure.value} n={spec.n} p={spec.p}{sig} seed={spec.seed}"


__all__ = [
    "Kind",
    "Structure",
    "ScenarioSpec",
    "GroundTruth",
    "PRESETS",
    "preset",
    "smallest_eigenvalue",
    "build_mean_truth",
    "build_cov_truth",
    "build_truth",
    "truth_for",
    "generate_dataset",
    "replicate",
    "dense_delta",
    "signal_grid",
    "describe",
    "pd_check",
]
