"""Counterfactual forecasting and causal-effect summaries around an intervention."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .bsts import ComponentSpec, VariancePrior, build_model, gibbs_sample, posterior_predict
from .errors import CoverImpactError, FormatError, ImpactError, ParameterError
from .series import CoverageSeries

RELATIVE_GUARD = 1e-9


@dataclass
class ImpactConfig:
    """``intervention_index`` is the number of pre-period points."""

    intervention_index: int
    component: ComponentSpec = field(default_factory=ComponentSpec)
    priors: Optional[List[VariancePrior]] = None
    n_iter: int = 2000
    burn_in: int = 500
    seed: Optional[int] = None
    credible_level: float = 0.95

    def __post_init__(self):
        if isinstance(self.component, str):
            self.component = ComponentSpec(self.component)
        if not 0.0 < self.credible_level < 1.0:
            raise ParameterError(f"credible_level must lie in (0, 1), got {self.credible_level}")
        self.intervention_index = int(self.intervention_index)
        if self.intervention_index < 3:
            raise ParameterError(
                f"intervention index {self.intervention_index} leaves fewer than 3 pre-period points"
            )


@dataclass
class Band:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def to_dict(self) -> dict:
        return {k: _floats(getattr(self, k)) for k in ("mean", "lower", "upper")}

    @classmethod
    def from_dict(cls, d) -> "Band":
        return cls(*(np.asarray(d[k], dtype=np.float64) for k in ("mean", "lower", "upper")))


@dataclass
class ImpactReport:
    intervention_index: int
    intervention_epoch: int
    credible_level: float
    component: str
    epochs: np.ndarray
    observed: np.ndarray
    counterfactual: Band
    point_effect: Band
    cumulative_effect: Band
    average_effect: Band
    total_effect: Band
    relative_effect: Band
    tail_probability: float
    n_draws: int
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "intervention_index": self.intervention_index,
            "intervention_epoch": self.intervention_epoch,
            "credible_level": self.credible_level,
            "component": self.component,
            "n_draws": self.n_draws,
            "seed": self.seed,
            "post": {
                "epoch": [int(e) for e in self.epochs],
                "observed": _floats(self.observed),
                "counterfactual": self.counterfactual.to_dict(),
                "point_effect": self.point_effect.to_dict(),
                "cumulative_effect": self.cumulative_effect.to_dict(),
            },
            "summary": {
                "average_effect": _scalar_band(self.average_effect),
                "cumulative_effect": _scalar_band(self.total_effect),
                "relative_effect": _scalar_band(self.relative_effect),
                "tail_probability": self.tail_probability,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d) -> "ImpactReport":
        try:
            post = d["post"]
            summary = d["summary"]
            return cls(
                intervention_index=int(d["intervention_index"]),
                intervention_epoch=int(d["intervention_epoch"]),
                credible_level=float(d["credible_level"]),
                component=str(d["component"]),
                epochs=np.asarray(post["epoch"], dtype=np.int64),
                observed=np.asarray(post["observed"], dtype=np.float64),
                counterfactual=Band.from_dict(post["counterfactual"]),
                point_effect=Band.from_dict(post["point_effect"]),
                cumulative_effect=Band.from_dict(post["cumulative_effect"]),
                average_effect=Band.from_dict(summary["average_effect"]),
                total_effect=Band.from_dict(summary["cumulative_effect"]),
                relative_effect=Band.from_dict(summary["relative_effect"]),
                tail_probability=float(summary["tail_probability"]),
                n_draws=int(d["n_draws"]),
                seed=d.get("seed"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"impact JSON is missing or has a malformed field ({exc})") from None

    def to_csv(self) -> str:
        cols = ["epoch", "observed"]
        blocks = [("counterfactual", self.counterfactual), ("point_effect", self.point_effect),
                  ("cumulative_effect", self.cumulative_effect)]
        for name, _ in blocks:
            cols += [f"{name}_{k}" for k in ("mean", "lower", "upper")]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for i, epoch in enumerate(self.epochs):
            row = ["%d" % epoch, "%.10g" % self.observed[i]]
            for _, band in blocks:
                row += ["%.10g" % band.mean[i], "%.10g" % band.lower[i], "%.10g" % band.upper[i]]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def _floats(arr) -> list:
    return [float(x) for x in np.asarray(arr).reshape(-1)]


def _scalar_band(b: Band) -> dict:
    return {k: float(np.asarray(getattr(b, k)).reshape(-1)[0]) for k in ("mean", "lower", "upper")}


def effect_quantiles(draws, level: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Equal-tailed (lower, median, upper) per column of a draws x t matrix.

    Linear interpolation between order statistics.
    """
    draws = np.asarray(draws, dtype=np.float64)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape[0] < 2:
        raise ParameterError(f"need at least 2 draws, got {draws.shape[0]}")
    if not 0.0 < level < 1.0:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    tail = (1.0 - level) / 2.0
    lo, med, hi = np.quantile(draws, [tail, 0.5, 1.0 - tail], axis=0, method="linear")
    return lo, med, hi


def _band(draws, level, mean=None) -> Band:
    draws = np.asarray(draws, dtype=np.float64)
    if draws.ndim == 1:
        draws = draws[:, None]
    lo, _, hi = effect_quantiles(draws, level)
    if mean is None:
        mean = draws.mean(axis=0)
    return Band(np.asarray(mean, dtype=np.float64), lo, hi)


def tail_probability(cumulative_final) -> float:
    """Share of draws whose total effect has the opposite sign to the median."""
    x = np.asarray(cumulative_final, dtype=np.float64)
    median = np.median(x)
    if median >= 0:
        return float(np.mean(x < 0))
    return float(np.mean(x > 0))


def summarize(observed, predictions, level: float):
    """Pointwise/cumulative effect bands from predictive draws (draws x h)."""
    observed = np.asarray(observed, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    effects = observed[None, :] - predictions
    cumulative = np.cumsum(effects, axis=1)
    cf_total = predictions.sum(axis=1)
    h = observed.shape[0]

    counterfactual = _band(predictions, level)
    point = _band(effects, level, mean=observed - counterfactual.mean)
    cum = _band(cumulative, level)

    total = cumulative[:, -1]
    average = _band(total / h, level)
    total_band = _band(total, level)
    cf_mean = cf_total.mean()
    if abs(cf_mean) < RELATIVE_GUARD:
        raise ImpactError(
            f"relative effect undefined: cumulative counterfactual mean {cf_mean:.3g} is within {RELATIVE_GUARD} of 0"
        )
    relative = _band(total / cf_mean, level)
    return counterfactual, point, cum, average, total_band, relative, tail_probability(total)


def run_impact(series: CoverageSeries, cfg: ImpactConfig, backend=None) -> ImpactReport:
    """Fit on the pre-period, forecast the post-period, and summarize effects."""
    n = len(series)
    tau = cfg.intervention_index
    if tau > n - 1:
        raise ParameterError(f"intervention index {tau} leaves no post-period in a series of length {n}")
    y = series.values
    pre, post = y[:tau], y[tau:]
    if not np.var(pre) > 0:
        raise ImpactError("pre-period is constant; the structural model cannot be fitted")

    init_var = 0.1 * np.var(pre, ddof=1)
    names = ComponentSpec(cfg.component.kind).state_names
    m = build_model(cfg.component, [init_var] * (1 + len(names)), y=pre)

    seq = np.random.SeedSequence(cfg.seed)
    fit_seed, pred_seed = seq.spawn(2)
    try:
        draws = gibbs_sample(m, pre, cfg.priors, cfg.n_iter, cfg.burn_in, seed=fit_seed, backend=backend)
    except CoverImpactError as exc:
        raise ImpactError(f"model fit on the pre-period failed: {exc}") from exc
    predictions = posterior_predict(draws, m, n - tau, seed=pred_seed)

    cf, point, cum, avg, total, rel, p = summarize(post, predictions, cfg.credible_level)
    return ImpactReport(
        intervention_index=tau,
        intervention_epoch=int(series.epochs[tau - 1]),
        credible_level=cfg.credible_level,
        component=cfg.component.kind,
        epochs=series.epochs[tau:].copy(),
        observed=post.copy(),
        counterfactual=cf,
        point_effect=point,
        cumulative_effect=cum,
        average_effect=avg,
        total_effect=total,
        relative_effect=rel,
        tail_probability=p,
        n_draws=len(draws),
        seed=cfg.seed,
    )
