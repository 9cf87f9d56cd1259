"""Single-changepoint likelihood-ratio test with Normal segment likelihoods.

``tau`` is the length of the first segment: the series splits into
``y[:tau]`` and ``y[tau:]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DegeneracyError, ParameterError
from .series import CoverageSeries

STATISTICS = ("mean", "variance", "mean_and_variance")

# Extra free parameters under the alternative, the changepoint included.
SIC_PARAMS = {"mean": 2, "variance": 2, "mean_and_variance": 3}

LOG_2PI = math.log(2.0 * math.pi)


def _check_statistic(statistic: str) -> None:
    if statistic not in STATISTICS:
        raise ParameterError(f"unknown statistic {statistic!r}; choose one of {', '.join(STATISTICS)}")


def estimates_variance(statistic: str) -> bool:
    return statistic in ("variance", "mean_and_variance")


@dataclass
class CptConfig:
    statistic: str = "mean_and_variance"
    threshold_c: Union[float, str] = "sic"
    min_seg_len: int = 2

    def __post_init__(self):
        _check_statistic(self.statistic)
        if isinstance(self.threshold_c, str):
            if self.threshold_c.lower() != "sic":
                try:
                    self.threshold_c = float(self.threshold_c)
                except ValueError:
                    raise ParameterError(f"threshold must be a positive number or 'sic', got {self.threshold_c!r}") from None
            else:
                self.threshold_c = "sic"
        if not isinstance(self.threshold_c, str) and not self.threshold_c > 0:
            raise ParameterError(f"threshold must be positive, got {self.threshold_c}")
        self.min_seg_len = int(self.min_seg_len)
        if self.min_seg_len < 1:
            raise ParameterError("min_seg_len must be >= 1")
        if estimates_variance(self.statistic) and self.min_seg_len < 2:
            self.min_seg_len = 2

    def resolve_threshold(self, n: int) -> float:
        if self.threshold_c == "sic":
            return SIC_PARAMS[self.statistic] * math.log(n)
        return float(self.threshold_c)


@dataclass
class ChangepointResult:
    tau_hat: Optional[int]
    lambda_: float
    threshold: float
    rejected: bool
    per_tau_ml: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "tau_hat": self.tau_hat,
            "lambda": self.lambda_,
            "threshold": self.threshold,
            "rejected": self.rejected,
            "per_tau_ml": [float(x) for x in self.per_tau_ml],
        }


def segment_loglik(y, statistic: str, global_var=None, global_mean=None, start: int = 0) -> float:
    """Maximized Normal log-likelihood of one segment.

    ``mean`` fits the segment mean with ``global_var`` held fixed;
    ``variance`` fits the variance about ``global_mean``; ``mean_and_variance``
    fits both. ``start`` only labels the segment in error messages.
    """
    _check_statistic(statistic)
    y = np.asarray(y, dtype=np.float64)
    m = len(y)
    if m < 1:
        raise ParameterError("segment must hold at least one point")

    if statistic == "mean":
        if global_var is None:
            raise ParameterError("the mean statistic needs the global variance")
        if not global_var > 0:
            raise DegeneracyError(start, start + m, f"global variance is {global_var}; the mean statistic needs it > 0")
        rss = np.sum((y - y.mean()) ** 2)
        return -0.5 * m * (LOG_2PI + math.log(global_var)) - 0.5 * rss / global_var

    if m < 2:
        raise ParameterError(f"the {statistic} statistic needs segments of length >= 2")
    if statistic == "variance":
        if global_mean is None:
            raise ParameterError("the variance statistic needs the global mean")
        center = global_mean
    else:
        center = y.mean()
    var = np.sum((y - center) ** 2) / m
    if not var > 0:
        raise DegeneracyError(start, start + m)
    return -0.5 * m * (LOG_2PI + math.log(var) + 1.0)


def _global_params(y: np.ndarray):
    mean = y.mean()
    var = np.sum((y - mean) ** 2) / len(y)
    return mean, var


def null_loglik(y, statistic: str) -> float:
    y = np.asarray(y, dtype=np.float64)
    mean, var = _global_params(y)
    return segment_loglik(y, statistic, global_var=var, global_mean=mean)


def ml_tau(y, tau: int, statistic: str, min_seg_len: int = 1) -> float:
    """Two-segment maximized log-likelihood for a split after ``tau`` points."""
    if isinstance(y, CoverageSeries):
        y = y.values
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if estimates_variance(statistic):
        min_seg_len = max(min_seg_len, 2)
    if not min_seg_len <= tau <= n - min_seg_len:
        raise ParameterError(f"tau={tau} outside admissible range [{min_seg_len}, {n - min_seg_len}]")
    mean, var = _global_params(y)
    return (
        segment_loglik(y[:tau], statistic, var, mean, start=0)
        + segment_loglik(y[tau:], statistic, var, mean, start=tau)
    )


def detect_single(series, cfg: Optional[CptConfig] = None) -> ChangepointResult:
    """Scan every admissible split and run the likelihood-ratio test.

    Ties in the maximized likelihood go to the smallest ``tau``.
    """
    cfg = cfg or CptConfig()
    y = series.values if isinstance(series, CoverageSeries) else np.asarray(series, dtype=np.float64)
    n = len(y)
    k = cfg.min_seg_len
    if n < 2 * k:
        raise ParameterError(f"series of length {n} is too short; need >= {2 * k} points")

    mean, var = _global_params(y)
    if estimates_variance(cfg.statistic) or cfg.statistic == "mean":
        if not var > 0:
            raise DegeneracyError(0, n, "series is constant; the likelihood ratio is undefined")
    null = segment_loglik(y, cfg.statistic, var, mean)

    taus = range(k, n - k + 1)
    per_tau = np.array([
        segment_loglik(y[:tau], cfg.statistic, var, mean, start=0)
        + segment_loglik(y[tau:], cfg.statistic, var, mean, start=tau)
        for tau in taus
    ])
    best = int(np.argmax(per_tau))
    lam = max(2.0 * (per_tau[best] - null), 0.0)
    threshold = cfg.resolve_threshold(n)
    rejected = bool(lam > threshold)
    return ChangepointResult(
        tau_hat=k + best if rejected else None,
        lambda_=float(lam),
        threshold=float(threshold),
        rejected=rejected,
        per_tau_ml=per_tau,
    )
