"""Gibbs sampling of variance parameters and states; posterior prediction."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ConditioningError, ParameterError
from . import _backend
from .filtering import as_observations
from .model import StateSpaceModel, VariancePrior, default_priors


@dataclass
class PosteriorDraws:
    """Retained (post burn-in) draws.

    ``obs_var`` has shape (draws,), ``Q`` (draws, q) and ``states``
    (draws, n, d).
    """

    obs_var: np.ndarray
    Q: np.ndarray
    states: np.ndarray
    burn_in: int
    seed: Optional[int]

    def __len__(self):
        return self.obs_var.shape[0]

    def to_csv(self, names: Sequence[str] = ()) -> str:
        """Variance draws, one row per retained iteration."""
        q = self.Q.shape[1]
        names = list(names) or [f"q{j + 1}" for j in range(q)]
        buf = io.StringIO()
        buf.write(",".join(["draw", "obs_var"] + [f"q_{n}" for n in names]) + "\n")
        for i in range(len(self)):
            row = [str(i), repr(float(self.obs_var[i]))] + [repr(float(x)) for x in self.Q[i]]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def _check_priors(m: StateSpaceModel, priors, y) -> list:
    if priors is None:
        return default_priors(m, y)
    priors = list(priors)
    if len(priors) != 1 + m.q:
        raise ParameterError(f"need {1 + m.q} priors (observation + {m.q} state), got {len(priors)}")
    return [p if isinstance(p, VariancePrior) else VariancePrior(*p) for p in priors]


def gibbs_sample(
    m: StateSpaceModel,
    y,
    priors=None,
    n_iter: int = 2000,
    burn_in: int = 500,
    seed: Optional[int] = None,
    backend=None,
) -> PosteriorDraws:
    """Alternate FFBS state draws with conjugate inverse-gamma variance draws.

    The chain starts from the variances stored in ``m``; zero starting
    values are replaced by a small fraction of the data variance so the
    first state draw is well defined. Draws are reproducible from ``seed``
    whichever backend runs them.
    """
    n_iter = int(n_iter)
    burn_in = int(burn_in)
    if burn_in < 0 or n_iter <= burn_in:
        raise ParameterError(f"need n_iter > burn_in >= 0, got n_iter={n_iter}, burn_in={burn_in}")
    yv, observed = as_observations(y)
    priors = _check_priors(m, priors, np.where(observed.astype(bool), yv, np.nan))
    n = len(yv)
    n_obs = int(observed.sum())

    init = m.variances.copy()
    fallback = 0.1 * (np.var(yv[observed.astype(bool)]) if n_obs > 1 else 1.0) or 0.1
    init[init <= 0] = fallback

    shapes = np.array([priors[0].shape + 0.5 * n_obs] + [p.shape + 0.5 * (n - 1) for p in priors[1:]])
    scales = np.array([p.scale for p in priors])

    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_iter, n, m.d))
    gam = np.column_stack([rng.standard_gamma(s, n_iter) for s in shapes])

    k = _backend.get_kernels(backend)
    var_draws, states, bad, bad_it = k.gibbs_chain(
        m.Z, m.T, m.R, np.linalg.pinv(m.R), m.a1, m.P1, yv, observed,
        scales, init, z, gam, burn_in,
    )
    if bad >= 0:
        err = ConditioningError(int(bad), float("nan"))
        err.args = (f"Kalman filter failed at t={bad} in Gibbs iteration {bad_it}",)
        raise err
    return PosteriorDraws(
        obs_var=var_draws[:, 0].copy(),
        Q=var_draws[:, 1:].copy(),
        states=states,
        burn_in=burn_in,
        seed=seed,
    )


def posterior_predict(draws: PosteriorDraws, m: StateSpaceModel, horizon: int, seed=None) -> np.ndarray:
    """Predictive sample paths of y over ``horizon`` steps, shape (draws, horizon).

    Each draw's final state is propagated forward with disturbances and
    observation noise drawn at that draw's variances.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    rng = np.random.default_rng(seed)
    n_draws = len(draws)
    alpha = draws.states[:, -1, :].copy()
    q_sd = np.sqrt(draws.Q)
    obs_sd = np.sqrt(draws.obs_var)
    out = np.zeros((n_draws, horizon))
    for h in range(horizon):
        eta = rng.standard_normal((n_draws, m.q)) * q_sd
        eps = rng.standard_normal(n_draws) * obs_sd
        alpha = alpha @ m.T.T + eta @ m.R.T
        out[:, h] = alpha @ m.Z + eps
    return out
