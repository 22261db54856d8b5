"""Monte Carlo experiments, ROC curves and report/CSV I/O."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import baselines
from .core_numeric import InvalidInputError, MxpbfError, SampleMatrix, rng_stream
from .cov_test import CovTestConfig, default_threads, mxpbf_cov
from .mean_test import DEFAULT_C_TH, MeanTestConfig, mxpbf_mean
from .scenarios import TRUTH_STREAM, ScenarioSpec, build_truth, replicate

SCHEMA_VERSION = 1


class CsvParseError(MxpbfError, ValueError):
    def __init__(self, path, row: int, column: int | None, message: str):
        self.row, self.column = row, column
        where = f"row {row}" + (f", column {column}" if column is not None else "")
        super().__init__(f"{path}: {where}: {message}")


# -- ROC ---------------------------------------------------------------------


@dataclass
class RocCurve:
    points: list[tuple[float, float]]
    auc: float
    n_h0: int
    n_h1: int

    def fpr(self) -> np.ndarray:
        return np.array([pt[0] for pt in self.points])

    def tpr(self) -> np.ndarray:
        return np.array([pt[1] for pt in self.points])


def _as_stat_array(values, name):
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InvalidInputError(f"{name} is empty")
    if np.any(np.isnan(arr)):
        raise InvalidInputError(f"{name} contains NaN")
    return arr


def trapezoid_area(points) -> float:
    area = 0.0
    for (f0, t0), (f1, t1) in zip(points[:-1], points[1:]):
        area += (f1 - f0) * (t0 + t1) / 2
    return area


def roc_from_samples(h0_stats, h1_stats) -> RocCurve:
    """ROC of the rule "reject when statistic > t" over every observed t.

    Infinite statistics are ordinary extreme values here: ``+inf`` exceeds
    every finite threshold and ``-inf`` none.
    """
    h0 = np.sort(_as_stat_array(h0_stats, "h0 sample"))
    h1 = np.sort(_as_stat_array(h1_stats, "h1 sample"))
    thresholds = np.unique(np.concatenate([h0, h1]))[::-1]
    # count of values strictly above t, via sorted search
    above0 = h0.size - np.searchsorted(h0, thresholds, side="right")
    above1 = h1.size - np.searchsorted(h1, thresholds, side="right")
    points = [(0.0, 0.0)]
    for a0, a1 in zip(above0, above1):
        pt = (a0 / h0.size, a1 / h1.size)
        if pt != points[-1]:
            points.append(pt)
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    points = [(float(f), float(t)) for f, t in points]
    return RocCurve(points=points, auc=trapezoid_area(points), n_h0=int(h0.size), n_h1=int(h1.size))


def rate_above(stats, threshold: float) -> float:
    stats = np.asarray(stats, dtype=np.float64)
    return float(np.mean(stats > threshold))


# -- methods -----------------------------------------------------------------


@dataclass(frozen=True)
class MethodSpec:
    """A test usable in experiments.

    ``run`` maps (x, y) to ``(statistic, reject)``; the statistic is oriented
    so larger values mean more evidence against H0.
    """

    name: str
    for_mean: bool
    run: Callable[[SampleMatrix, SampleMatrix], tuple[float, bool]]
    rule: str


def _mxpbf_mean_method(alpha: float, c_th: float) -> MethodSpec:
    cfg = MeanTestConfig(alpha=alpha)
    cut = math.log(c_th)

    def run(x, y):
        stat = mxpbf_mean(x, y, cfg).log_mxpbf
        return stat, stat > cut

    return MethodSpec("mxpbf", True, run, f"log mxPBF > log({c_th:g})")


def _mxpbf_cov_method(cfg: CovTestConfig, c_th: float) -> MethodSpec:
    cut = math.log(c_th)

    def run(x, y):
        stat = mxpbf_cov(x, y, cfg, threads=1).log_mxpbf
        return stat, stat > cut

    return MethodSpec("mxpbf", False, run, f"log mxPBF > log({c_th:g})")


def _freq_method(name: str, fn, for_mean: bool, level: float) -> MethodSpec:
    def run(x, y):
        res = fn(x, y)
        return res.statistic, res.reject(level)

    return MethodSpec(name, for_mean, run, f"p < {level:g}")


UNSUPPORTED = {
    "clx-mean": "the CLIME-based CLX mean test is not implemented",
}


def resolve_methods(
    names: Iterable[str],
    is_mean: bool,
    *,
    alpha: float | None = None,
    c_th: float = DEFAULT_C_TH,
    cov_cfg: CovTestConfig | None = None,
    level: float = baselines.DEFAULT_LEVEL,
) -> list[MethodSpec]:
    names = [n.strip().lower() for n in names if n.strip()]
    if not names:
        raise InvalidInputError("no methods given")
    out = []
    for name in names:
        if name == "mxpbf":
            if is_mean:
                out.append(_mxpbf_mean_method(alpha if alpha is not None else MeanTestConfig().alpha, c_th))
            else:
                cfg = cov_cfg or CovTestConfig(**({} if alpha is None else {"alpha": alpha}))
                out.append(_mxpbf_cov_method(cfg, c_th))
        elif is_mean and name in baselines.MEAN_TESTS:
            out.append(_freq_method(name, baselines.MEAN_TESTS[name], True, level))
        elif not is_mean and name in baselines.COV_TESTS:
            out.append(_freq_method(name, baselines.COV_TESTS[name], False, level))
        elif is_mean and name in ("clx", "clx-mean", "clx.at"):
            raise InvalidInputError(UNSUPPORTED["clx-mean"])
        else:
            scope = "mean" if is_mean else "covariance"
            raise InvalidInputError(f"method {name!r} is not available for {scope} scenarios")
    if len({m.name for m in out}) != len(out):
        raise InvalidInputError("duplicate methods")
    return out


# -- experiments -------------------------------------------------------------


@dataclass
class MethodOutcome:
    name: str
    rule: str
    h0: list[float]
    h1: list[float]
    reject_h0: list[bool]
    reject_h1: list[bool]
    roc: RocCurve

    @property
    def rejection_rate(self) -> float:
        return float(np.mean(self.reject_h1))

    @property
    def false_rejection_rate(self) -> float:
        return float(np.mean(self.reject_h0))


@dataclass
class ExperimentReport:
    spec: ScenarioSpec
    reps: int
    methods: list[MethodOutcome]
    seed: int
    wall_time: float = field(default=0.0, compare=False)

    def method(self, name: str) -> MethodOutcome:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "reps": self.reps,
            "spec": self.spec.to_dict(),
            "methods": [
                {
                    "name": m.name,
                    "rule": m.rule,
                    "h0": [_json_float(v) for v in m.h0],
                    "h1": [_json_float(v) for v in m.h1],
                    "reject_h0": m.reject_h0,
                    "reject_h1": m.reject_h1,
                    "rejection_rate": m.rejection_rate,
                    "false_rejection_rate": m.false_rejection_rate,
                    "auc": m.roc.auc,
                    "roc": [list(pt) for pt in m.roc.points],
                }
                for m in self.methods
            ],
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported report schema {d.get('schema_version')!r}")
        methods = []
        for m in d["methods"]:
            h0 = [_from_json_float(v) for v in m["h0"]]
            h1 = [_from_json_float(v) for v in m["h1"]]
            methods.append(MethodOutcome(m["name"], m["rule"], h0, h1, m["reject_h0"], m["reject_h1"],
                                         roc_from_samples(h0, h1)))
        return cls(ScenarioSpec(**d["spec"]), d["reps"], methods, d["seed"], d.get("wall_time", 0.0))


def _json_float(v: float):
    if math.isfinite(v):
        return v
    return "inf" if v > 0 else "-inf"


def _from_json_float(v) -> float:
    return float(v)


def run_experiment(
    spec: ScenarioSpec,
    methods: Iterable[str] = ("mxpbf",),
    reps: int = 50,
    *,
    threads: int | None = None,
    alpha: float | None = None,
    c_th: float = DEFAULT_C_TH,
    cov_cfg: CovTestConfig | None = None,
    level: float = baselines.DEFAULT_LEVEL,
) -> ExperimentReport:
    """Run every method on ``reps`` null and ``reps`` alternative datasets.

    Both hypotheses share the base covariance structure drawn from the spec
    seed; the alternative adds the planted signal.  Replicate ``r`` draws
    from streams keyed by ``(seed, hypothesis, r)`` only, so the report is
    identical for any ``threads``.
    """
    if reps < 2:
        raise InvalidInputError("reps must be at least 2")
    specs = resolve_methods(methods, spec.kind.is_mean, alpha=alpha, c_th=c_th, cov_cfg=cov_cfg, level=level)
    start = time.perf_counter()
    null_spec = spec.as_null()
    truth0 = build_truth(null_spec, rng_stream(spec.seed, TRUTH_STREAM))
    truth1 = build_truth(spec, rng_stream(spec.seed, TRUTH_STREAM))

    def one(task):
        hyp, r = task
        truth, sp = (truth0, null_spec) if hyp == 0 else (truth1, spec)
        x, y = replicate(truth, sp, r, hypothesis=hyp)
        return [m.run(x, y) for m in specs]

    tasks = [(h, r) for h in (0, 1) for r in range(reps)]
    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, tasks))
    else:
        results = [one(t) for t in tasks]

    outcomes = []
    for k, m in enumerate(specs):
        h0 = [float(results[r][k][0]) for r in range(reps)]
        h1 = [float(results[reps + r][k][0]) for r in range(reps)]
        rej0 = [bool(results[r][k][1]) for r in range(reps)]
        rej1 = [bool(results[reps + r][k][1]) for r in range(reps)]
        outcomes.append(MethodOutcome(m.name, m.rule, h0, h1, rej0, rej1, roc_from_samples(h0, h1)))
    return ExperimentReport(spec, reps, outcomes, spec.seed, wall_time=time.perf_counter() - start)


# -- CSV ---------------------------------------------------------------------


def read_matrix_csv(path, header: bool = False) -> SampleMatrix:
    """Rows are observations, columns variables, comma-separated."""
    text = Path(path).read_text()
    rows = []
    width = None
    reader = csv.reader(io.StringIO(text))
    for lineno, row in enumerate(reader, 1):
        if header and lineno == 1:
            continue
        if not row or all(not c.strip() for c in row):
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise CsvParseError(path, lineno, None, f"expected {width} fields, found {len(row)}")
        vals = []
        for col, cell in enumerate(row, 1):
            try:
                v = float(cell)
            except ValueError:
                raise CsvParseError(path, lineno, col, f"cannot parse {cell.strip()!r} as a number") from None
            if not math.isfinite(v):
                raise CsvParseError(path, lineno, col, f"non-finite value {cell.strip()!r}")
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise CsvParseError(path, 0, None, "no data rows")
    return SampleMatrix(np.array(rows))


def write_matrix_csv(path, m: SampleMatrix) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in m.values:
            w.writerow([format(v, ".17g") for v in row])


def read_values(path) -> list[float]:
    """One statistic per line (first CSV field); ``inf``/``-inf`` allowed."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        cell = line.split(",")[0].strip()
        if not cell:
            continue
        try:
            v = float(cell)
        except ValueError:
            raise CsvParseError(path, lineno, 1, f"cannot parse {cell!r} as a number") from None
        if math.isnan(v):
            raise CsvParseError(path, lineno, 1, "NaN statistic")
        out.append(v)
    return out
