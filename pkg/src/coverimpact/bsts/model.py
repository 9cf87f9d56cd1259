"""Time-invariant linear-Gaussian state-space models for structural components."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from ..errors import ParameterError

COMPONENTS = ("local_level", "local_linear_trend")

DIFFUSE_SCALE = 1e6


@dataclass(frozen=True)
class ComponentSpec:
    kind: str = "local_linear_trend"

    def __post_init__(self):
        if self.kind not in COMPONENTS:
            raise ParameterError(f"unknown component {self.kind!r}; choose one of {', '.join(COMPONENTS)}")

    @property
    def state_names(self):
        return ("level",) if self.kind == "local_level" else ("level", "slope")


@dataclass(frozen=True)
class VariancePrior:
    """Inverse-gamma(shape, scale) prior on one variance parameter."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ParameterError(f"inverse-gamma prior needs shape > 0 and scale > 0, got ({self.shape}, {self.scale})")


@dataclass(frozen=True)
class StateSpaceModel:
    """y_t = Z' a_t + eps_t,  a_{t+1} = T a_t + R eta_t.

    ``Q`` is stored as the vector of its diagonal entries.
    """

    Z: np.ndarray
    T: np.ndarray
    R: np.ndarray
    obs_var: float
    Q: np.ndarray
    a1: np.ndarray
    P1: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=np.float64).reshape(-1)
        d = Z.shape[0]
        T = np.asarray(self.T, dtype=np.float64).reshape(d, d)
        R = np.asarray(self.R, dtype=np.float64)
        if R.ndim == 1:
            R = R.reshape(d, -1)
        Q = np.asarray(self.Q, dtype=np.float64).reshape(-1)
        a1 = np.asarray(self.a1, dtype=np.float64).reshape(d)
        P1 = np.asarray(self.P1, dtype=np.float64).reshape(d, d)
        if R.shape[0] != d or R.shape[1] != Q.shape[0]:
            raise ParameterError(f"R must be {d} x {Q.shape[0]}, got {R.shape}")
        if Q.shape[0] > d:
            raise ParameterError("disturbance dimension q must not exceed state dimension d")
        if np.any(Q < 0) or not self.obs_var >= 0:
            raise ParameterError("variances must be >= 0")
        if not np.allclose(P1, P1.T, rtol=0, atol=1e-12 * max(1.0, np.abs(P1).max())):
            raise ParameterError("P1 must be symmetric")
        if d and np.linalg.eigvalsh(P1).min() < -1e-10 * max(1.0, np.abs(P1).max()):
            raise ParameterError("P1 must be positive semidefinite")
        for name, val in (("Z", Z), ("T", T), ("R", R), ("Q", Q), ("a1", a1), ("P1", P1)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "obs_var", float(self.obs_var))

    @property
    def d(self) -> int:
        return self.Z.shape[0]

    @property
    def q(self) -> int:
        return self.Q.shape[0]

    @property
    def RQR(self) -> np.ndarray:
        return (self.R * self.Q) @ self.R.T

    @property
    def variances(self) -> np.ndarray:
        """(obs_var, Q_11, ..., Q_qq)."""
        return np.concatenate([[self.obs_var], self.Q])

    def with_variances(self, obs_var, Q) -> "StateSpaceModel":
        return replace(self, obs_var=obs_var, Q=np.asarray(Q, dtype=np.float64))


def _resolve_variances(kind: str, variances) -> tuple:
    names = ("obs", "level") if kind == "local_level" else ("obs", "level", "slope")
    if isinstance(variances, Mapping):
        unknown = set(variances) - set(names)
        if unknown:
            raise ParameterError(f"unknown variance names {sorted(unknown)} for {kind}")
        values = tuple(float(variances.get(k, 0.0)) for k in names)
    else:
        values = tuple(float(v) for v in variances)
        if len(values) != len(names):
            raise ParameterError(f"{kind} takes {len(names)} variances ({', '.join(names)}), got {len(values)}")
    if any(v < 0 for v in values):
        raise ParameterError(f"variances must be >= 0, got {values}")
    return values


def diffuse_kappa(y: Optional[Sequence[float]] = None) -> float:
    if y is not None:
        y = np.asarray(y, dtype=np.float64)
        y = y[np.isfinite(y)]
        if len(y) > 1:
            var = np.var(y, ddof=1)
            if var > 0:
                return DIFFUSE_SCALE * var
    return DIFFUSE_SCALE


def build_model(spec: Union[ComponentSpec, str], variances, y=None) -> StateSpaceModel:
    """State-space form of a structural component.

    ``variances`` is (obs, level) or (obs, level, slope), or a mapping with
    those keys. The initial state is diffuse: a1 = 0, P1 = kappa I with kappa
    = 1e6 times the sample variance of ``y`` (1e6 when ``y`` is absent).
    """
    if isinstance(spec, str):
        spec = ComponentSpec(spec)
    vals = _resolve_variances(spec.kind, variances)
    kappa = diffuse_kappa(y)
    if spec.kind == "local_level":
        Z, T, R = np.ones(1), np.ones((1, 1)), np.ones((1, 1))
    else:
        Z = np.array([1.0, 0.0])
        T = np.array([[1.0, 1.0], [0.0, 1.0]])
        R = np.eye(2)
    d = len(Z)
    return StateSpaceModel(
        Z=Z, T=T, R=R, obs_var=vals[0], Q=np.array(vals[1:]),
        a1=np.zeros(d), P1=kappa * np.eye(d), kind=spec.kind,
    )


def default_priors(m: StateSpaceModel, y, shape: float = 0.01, scale_factor: float = 0.01):
    """Weak inverse-gamma priors scaled to the sample variance of ``y``."""
    y = np.asarray(y, dtype=np.float64)
    y = y[np.isfinite(y)]
    var = np.var(y, ddof=1) if len(y) > 1 else 0.0
    if not var > 0:
        var = 1.0
    return [VariancePrior(shape, scale_factor * var) for _ in range(1 + m.q)]
