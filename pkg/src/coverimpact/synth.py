"""Synthetic fixtures with known ground truth: images and coverage series."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import SpecError
from .imagery import DEFAULT_FOREST_RANGE, HsvRange, RasterImage, hsv_to_rgb, rgb_to_hsv
from .series import CoverageSeries

# Reds and browns; separated from the forest box in the hue channel.
DEFAULT_BACKGROUND_RANGE = ((0, 75, 30), (40, 255, 255))

_MAX_COLOR_TRIES = 64


@dataclass(frozen=True)
class SynthImageSpec:
    width: int
    height: int
    target_fraction: float
    forest_color_range: HsvRange = field(default_factory=lambda: HsvRange(*DEFAULT_FOREST_RANGE))
    background_color_range: HsvRange = field(default_factory=lambda: HsvRange(*DEFAULT_BACKGROUND_RANGE))
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise SpecError("image dimensions must be >= 1")
        if not 0.0 <= self.target_fraction <= 1.0:
            raise SpecError(f"target_fraction must lie in [0, 1], got {self.target_fraction}")
        if not self.forest_color_range.disjoint_from(self.background_color_range):
            raise SpecError(
                f"forest range {self.forest_color_range} overlaps background range "
                f"{self.background_color_range} in every channel"
            )


@dataclass(frozen=True)
class SynthSeriesSpec:
    n: int
    pre_slope: float = 0.0
    post_slope: float = 0.0
    level0: float = 0.5
    change_at: Optional[int] = None
    noise_sd: float = 0.0
    seed: int = 0
    start_epoch: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise SpecError("series length must be >= 1")
        if self.change_at is not None and not 1 <= self.change_at <= self.n - 1:
            raise SpecError(f"change_at must lie in [1, {self.n - 1}], got {self.change_at}")
        if self.noise_sd < 0:
            raise SpecError("noise_sd must be >= 0")


def sample_colors(rng: np.random.Generator, box: HsvRange, k: int) -> np.ndarray:
    """Draw ``k`` RGB colors whose byte-scale HSV lies inside ``box``.

    Uniform HSV draws are inverted to RGB; colors that quantize out of the
    box on the way back are redrawn.
    """
    lo = np.array(box.lower)
    hi = np.array(box.upper)
    out = np.zeros((k, 3), dtype=np.uint8)
    todo = np.arange(k)
    for _ in range(_MAX_COLOR_TRIES):
        if todo.size == 0:
            return out
        hsv = rng.integers(lo, hi + 1, size=(todo.size, 3))
        rgb = hsv_to_rgb(hsv)
        back = rgb_to_hsv(RasterImage(rgb[None, :, :])).pixels[0]
        ok = np.all((back >= lo) & (back <= hi), axis=-1)
        out[todo[ok]] = rgb[ok]
        todo = todo[~ok]
    if todo.size:
        raise SpecError(f"could not realize colors inside HSV range {box}")
    return out


def gen_image(spec: SynthImageSpec, epoch: int = 0) -> Tuple[RasterImage, float]:
    """Image with exactly round(target_fraction * pixels) forest-colored pixels."""
    rng = np.random.default_rng(spec.seed)
    total = spec.width * spec.height
    k = int(round(spec.target_fraction * total))
    positions = rng.permutation(total)[:k]
    is_forest = np.zeros(total, dtype=bool)
    is_forest[positions] = True

    flat = np.empty((total, 3), dtype=np.uint8)
    flat[is_forest] = sample_colors(rng, spec.forest_color_range, k)
    flat[~is_forest] = sample_colors(rng, spec.background_color_range, total - k)
    img = RasterImage(flat.reshape(spec.height, spec.width, 3), epoch)
    return img, k / total


def noiseless_path(spec: SynthSeriesSpec) -> np.ndarray:
    """Piecewise-linear mean path before noise and clamping.

    Increments y[t] - y[t-1] equal ``pre_slope`` for t < change_at and
    ``post_slope`` from change_at on, so the first ``change_at`` points are
    the pre-change regime.
    """
    t = np.arange(spec.n, dtype=np.float64)
    if spec.change_at is None:
        return spec.level0 + spec.pre_slope * t
    c = spec.change_at
    pre_steps = np.minimum(t, c - 1)
    post_steps = np.maximum(t - (c - 1), 0.0)
    return spec.level0 + spec.pre_slope * pre_steps + spec.post_slope * post_steps


def gen_series(spec: SynthSeriesSpec) -> CoverageSeries:
    rng = np.random.default_rng(spec.seed)
    y = noiseless_path(spec)
    if spec.noise_sd > 0:
        y = y + rng.normal(0.0, spec.noise_sd, size=spec.n)
    y = np.clip(y, 0.0, 1.0)
    return CoverageSeries.from_values(y, spec.start_epoch)
