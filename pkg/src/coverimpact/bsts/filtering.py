"""Kalman filter, fixed-interval smoother and forward-filter backward-sample."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConditioningError, ParameterError
from . import _backend
from ._pykernels import psd_cholesky, psd_solve
from .model import StateSpaceModel

PSD_TOL = 1e-10


@dataclass
class FilterOutput:
    """Per-t predicted (``a_pred``/``P_pred``, given y_1..y_{t-1}) and
    filtered moments, innovations and their variances (NaN where y_t is
    missing), and the total log-likelihood."""

    a_pred: np.ndarray
    P_pred: np.ndarray
    a_filt: np.ndarray
    P_filt: np.ndarray
    v: np.ndarray
    F: np.ndarray
    loglik: float
    observed: np.ndarray


@dataclass
class SmootherOutput:
    mean: np.ndarray
    cov: np.ndarray


def as_observations(y):
    """Float copy of ``y`` and its observed mask (NaN/None mark missing slots)."""
    y = np.array(y, dtype=np.float64).reshape(-1)
    observed = np.isfinite(y)
    if len(y) < 1:
        raise ParameterError("need at least one time point")
    if not observed.any():
        raise ParameterError("need at least one observed value")
    return np.where(observed, y, 0.0), observed.astype(np.uint8)


def kalman_filter(m: StateSpaceModel, y, backend=None) -> FilterOutput:
    yv, observed = as_observations(y)
    k = _backend.get_kernels(backend)
    a_pred, P_pred, a_filt, P_filt, v, F, loglik, bad = k.kalman_forward(
        m.Z, m.T, m.RQR, m.obs_var, m.a1, m.P1, yv, observed
    )
    if bad >= 0:
        raise ConditioningError(int(bad), float(F[bad]))
    return FilterOutput(a_pred, P_pred, a_filt, P_filt, v, F, float(loglik), observed.astype(bool))


def _floor_psd(P, t):
    P = 0.5 * (P + P.T)
    w, V = np.linalg.eigh(P)
    if w.min() >= 0:
        return P
    scale = max(1.0, np.abs(w).max())
    if w.min() < -PSD_TOL * scale:
        # large negative eigenvalues mean a real failure, not rounding
        raise ConditioningError(t, float(w.min()))
    w = np.maximum(w, 0.0)
    return (V * w) @ V.T


def kalman_smoother(m: StateSpaceModel, fo: FilterOutput) -> SmootherOutput:
    n, d = fo.a_filt.shape
    mean = np.zeros((n, d))
    cov = np.zeros((n, d, d))
    mean[-1] = fo.a_filt[-1]
    cov[-1] = fo.P_filt[-1]
    T = m.T
    for t in range(n - 2, -1, -1):
        Pf = fo.P_filt[t]
        B = T @ Pf
        L = psd_cholesky(fo.P_pred[t + 1])
        G = np.column_stack([psd_solve(L, B[:, j]) for j in range(d)]).T
        mean[t] = fo.a_filt[t] + G @ (mean[t + 1] - fo.a_pred[t + 1])
        cov[t] = _floor_psd(Pf + G @ (cov[t + 1] - fo.P_pred[t + 1]) @ G.T, t)
    return SmootherOutput(mean, cov)


def ffbs(m: StateSpaceModel, y, seed=None, rng=None, backend=None) -> np.ndarray:
    """One draw of the state path from p(alpha_1:n | y) under ``m``."""
    fo = kalman_filter(m, y, backend=backend)
    if rng is None:
        rng = np.random.default_rng(seed)
    n, d = fo.a_filt.shape
    z = rng.standard_normal((n, d))
    k = _backend.get_kernels(backend)
    return k.backward_sample(m.T, fo.a_filt, fo.P_filt, fo.a_pred, fo.P_pred, z)
