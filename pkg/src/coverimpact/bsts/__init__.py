"""Bayesian structural time-series engine."""

from ._backend import BACKEND, available, get_kernels
from .filtering import FilterOutput, SmootherOutput, ffbs, kalman_filter, kalman_smoother
from .gibbs import PosteriorDraws, gibbs_sample, posterior_predict
from .model import (
    COMPONENTS,
    ComponentSpec,
    StateSpaceModel,
    VariancePrior,
    build_model,
    default_priors,
)

__all__ = [
    "BACKEND",
    "COMPONENTS",
    "ComponentSpec",
    "FilterOutput",
    "PosteriorDraws",
    "SmootherOutput",
    "StateSpaceModel",
    "VariancePrior",
    "available",
    "build_model",
    "default_priors",
    "ffbs",
    "get_kernels",
    "gibbs_sample",
    "kalman_filter",
    "kalman_smoother",
    "posterior_predict",
]
