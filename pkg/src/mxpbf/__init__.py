"""Maximum pairwise Bayes factor (mxPBF) two-sample tests for high-dimensional data."""

from .baselines import (
    FreqTestResult,
    bs_mean_test,
    clx_cov_test,
    lc_cov_test,
    schott_cov_test,
    sd_mean_test,
)
from .core_numeric import (
    DegenerateError,
    InvalidInputError,
    MxpbfError,
    NotPositiveDefiniteError,
    SampleMatrix,
)
from .cov_test import CovTestConfig, CovTestResult, decide_cov, log_pbf_cov, mxpbf_cov
from .harness import ExperimentReport, RocCurve, roc_from_samples, run_experiment
from .mean_test import MeanTestConfig, MeanTestResult, decide_mean, log_pbf_mean, mxpbf_mean
from .scenarios import GroundTruth, ScenarioSpec, preset

__version__ = "0.1.0"

__all__ = [
    "SampleMatrix",
    "MxpbfError",
    "InvalidInputError",
    "DegenerateError",
    "NotPositiveDefiniteError",
    "MeanTestConfig",
    "MeanTestResult",
    "log_pbf_mean",
    "mxpbf_mean",
    "decide_mean",
    "CovTestConfig",
    "CovTestResult",
    "log_pbf_cov",
    "mxpbf_cov",
    "decide_cov",
    "FreqTestResult",
    "bs_mean_test",
    "sd_mean_test",
    "schott_cov_test",
    "lc_cov_test",
    "clx_cov_test",
    "ScenarioSpec",
    "GroundTruth",
    "preset",
    "ExperimentReport",
    "RocCurve",
    "roc_from_samples",
    "run_experiment",
]
