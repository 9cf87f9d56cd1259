"""Causal impact of interventions on coverage series derived from image time series.

Pipeline: segment each epoch's image with an HSV box, build the coverage
series, locate the intervention with a single-changepoint likelihood-ratio
test, then forecast the no-intervention counterfactual with a Bayesian
structural time-series model and report observed-minus-predicted effects.
"""

__version__ = "0.1.0"

from .changepoint import ChangepointResult, CptConfig, detect_single, ml_tau, segment_loglik
from .imagery import (
    BinaryMask,
    HsvPixelGrid,
    HsvRange,
    RasterImage,
    apply_hsv_mask,
    calibration_grid,
    coverage_fraction,
    decode_image,
    gaussian_blur,
    rgb_to_hsv,
)
from .impact import ImpactConfig, ImpactReport, effect_quantiles, run_impact
from .series import CoverageSeries
from .synth import SynthImageSpec, SynthSeriesSpec, gen_image, gen_series
