"""Per-epoch image segmentation: decoding, RGB->HSV, blur, HSV masks, coverage."""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, ParameterError

Triple = Tuple[int, int, int]

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# Forest-cover bounds reported for 8-bit imagery on the full-byte hue scale.
DEFAULT_FOREST_RANGE = ((55, 75, 30), (205, 255, 255))


def _check_grid(pixels: np.ndarray, channels: int, what: str) -> np.ndarray:
    arr = np.asarray(pixels)
    expected_ndim = 3 if channels > 1 else 2
    if arr.ndim != expected_ndim or (channels > 1 and arr.shape[2] != channels):
        raise ParameterError(f"{what}: expected shape (height, width{', %d' % channels if channels > 1 else ''}), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParameterError(f"{what}: width and height must be >= 1")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.integer) and arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ParameterError(f"{what}: channel values outside [0, 255]")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ParameterError(f"{what}: integer pixels required, got {arr.dtype}")
        arr = arr.astype(np.uint8)
    return arr


@dataclass(frozen=True)
class RasterImage:
    """8-bit RGB image, ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray
    epoch: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pixels", _check_grid(self.pixels, 3, "RasterImage"))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class HsvPixelGrid:
    """HSV triples on the 0-255 byte scale (hue = degrees / 360 * 255)."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _check_grid(self.pixels, 3, "HsvPixelGrid"))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class HsvRange:
    lower: Triple
    upper: Triple

    def __post_init__(self):
        lower = tuple(int(x) for x in self.lower)
        upper = tuple(int(x) for x in self.upper)
        if len(lower) != 3 or len(upper) != 3:
            raise ParameterError("HsvRange bounds must have three channels")
        for lo, hi in zip(lower, upper):
            if not (0 <= lo <= 255 and 0 <= hi <= 255):
                raise ParameterError(f"HsvRange bounds outside [0, 255]: {lower} / {upper}")
            if lo > hi:
                raise ParameterError(f"HsvRange lower exceeds upper: {lower} / {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def parse(cls, text: str) -> "HsvRange":
        """Parse ``"h,s,v:h,s,v"`` (lower then upper)."""
        try:
            lo, hi = text.split(":")
            lower = tuple(int(x) for x in lo.split(","))
            upper = tuple(int(x) for x in hi.split(","))
        except ValueError:
            raise ParameterError(f"cannot parse HSV range {text!r}; expected 'h,s,v:h,s,v'") from None
        return cls(lower, upper)

    def __str__(self) -> str:
        return "%d,%d,%d:%d,%d,%d" % (self.lower + self.upper)

    def disjoint_from(self, other: "HsvRange") -> bool:
        """True if the two boxes are separated in at least one channel."""
        return any(
            self.upper[i] < other.lower[i] or other.upper[i] < self.lower[i]
            for i in range(3)
        )


@dataclass(frozen=True)
class BinaryMask:
    """Values 255 (covered) and 0 (background), shape (height, width)."""

    bits: np.ndarray

    def __post_init__(self):
        bits = _check_grid(self.bits, 1, "BinaryMask")
        if not np.all((bits == 0) | (bits == 255)):
            raise ParameterError("BinaryMask may only contain 0 and 255")
        object.__setattr__(self, "bits", bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


def _png_bit_depth(data: bytes):
    if not data.startswith(PNG_SIGNATURE) or len(data) < 33:
        return None
    length, ctype = struct.unpack(">I4s", data[8:16])
    if ctype != b"IHDR" or length != 13:
        return None
    return data[24]


def decode_image(data: bytes, epoch: int = 0, path=None) -> RasterImage:
    """Decode an encoded raster file into an 8-bit RGB image.

    Alpha is dropped and grayscale is replicated to three channels. Inputs
    with more than 8 bits per channel are rejected rather than truncated.
    """
    where = str(path) if path is not None else "<bytes>"
    depth = _png_bit_depth(data)
    if depth is not None and depth > 8:
        raise DecodeError(f"{where}: unsupported bit depth {depth} (8-bit images required)")
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            mode = im.mode
            if mode in ("I", "I;16", "I;16B", "I;16L", "F") or mode.startswith("I;"):
                raise DecodeError(f"{where}: unsupported bit depth (mode {mode})")
            if mode in ("RGBA", "LA", "PA") or (mode == "P" and "transparency" in im.info):
                im = im.convert("RGBA").convert("RGB")
            elif mode != "RGB":
                im = im.convert("RGB")
            pixels = np.array(im, dtype=np.uint8)
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"{where}: cannot decode image ({exc})") from None
    return RasterImage(pixels, int(epoch))


def read_image(path, epoch: int = 0) -> RasterImage:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DecodeError(f"{path}: cannot read ({exc.strerror})") from None
    return decode_image(data, epoch, path=path)


def encode_png(pixels: np.ndarray) -> bytes:
    """Encode a uint8 grid (H, W) or (H, W, 3) as PNG bytes."""
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def rgb_to_hsv(img: RasterImage) -> HsvPixelGrid:
    """Hexcone RGB->HSV with every channel on the 0-255 byte scale.

    Achromatic pixels (max == min) get hue 0.
    """
    rgb = img.pixels.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    chroma = mx - mn
    safe = np.where(chroma > 0, chroma, 1.0)

    hue = np.zeros_like(mx)
    is_r = (chroma > 0) & (mx == r)
    is_g = (chroma > 0) & (mx == g) & ~is_r
    is_b = (chroma > 0) & ~is_r & ~is_g
    hue[is_r] = np.mod((g - b)[is_r] / safe[is_r], 6.0)
    hue[is_g] = (b - r)[is_g] / safe[is_g] + 2.0
    hue[is_b] = (r - g)[is_b] / safe[is_b] + 4.0
    hue_deg = 60.0 * hue

    h = _round_half_up(hue_deg / 360.0 * 255.0)
    s = np.where(mx > 0, _round_half_up(255.0 * chroma / np.where(mx > 0, mx, 1.0)), 0.0)
    out = np.stack([h, s, mx], axis=-1)
    return HsvPixelGrid(np.clip(out, 0, 255).astype(np.uint8))


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv` on byte-scaled arrays of shape (..., 3)."""
    hsv = np.asarray(hsv, dtype=np.float64)
    h = hsv[..., 0] / 255.0 * 6.0
    s = hsv[..., 1] / 255.0
    v = hsv[..., 2]
    c = v * s
    sector = np.floor(h).astype(np.int64) % 6
    frac = h - np.floor(h)
    x = c * np.where(sector % 2 == 0, frac, 1.0 - frac)
    m = v - c
    zeros = np.zeros_like(v)
    table = [
        (c, x, zeros),
        (x, c, zeros),
        (zeros, c, x),
        (zeros, x, c),
        (x, zeros, c),
        (c, zeros, x),
    ]
    rgb = np.zeros(hsv.shape, dtype=np.float64)
    for k, (rr, gg, bb) in enumerate(table):
        sel = sector == k
        rgb[..., 0][sel] = rr[sel]
        rgb[..., 1][sel] = gg[sel]
        rgb[..., 2][sel] = bb[sel]
    rgb += m[..., None]
    return np.clip(_round_half_up(rgb), 0, 255).astype(np.uint8)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian weights with radius ceil(3 sigma)."""
    if not sigma > 0:
        raise ParameterError(f"blur sigma must be > 0, got {sigma!r}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def gaussian_blur(img: RasterImage, sigma: float) -> RasterImage:
    """Separable Gaussian blur with clamp-to-edge borders."""
    kernel = gaussian_kernel(sigma)
    radius = len(kernel) // 2
    data = img.pixels.astype(np.float64)
    h, w = data.shape[:2]

    padded = np.pad(data, ((radius, radius), (0, 0), (0, 0)), mode="edge")
    rows = np.zeros_like(data)
    for k, wk in enumerate(kernel):
        rows += wk * padded[k:k + h]

    padded = np.pad(rows, ((0, 0), (radius, radius), (0, 0)), mode="edge")
    out = np.zeros_like(data)
    for k, wk in enumerate(kernel):
        out += wk * padded[:, k:k + w]

    out = np.clip(_round_half_up(out), 0, 255).astype(np.uint8)
    return RasterImage(out, img.epoch)


def apply_hsv_mask(grid: HsvPixelGrid, rng: HsvRange) -> BinaryMask:
    lower = np.array(rng.lower, dtype=np.uint8)
    upper = np.array(rng.upper, dtype=np.uint8)
    inside = np.all((grid.pixels >= lower) & (grid.pixels <= upper), axis=-1)
    return BinaryMask(np.where(inside, 255, 0).astype(np.uint8))


def coverage_fraction(mask: BinaryMask) -> float:
    return np.count_nonzero(mask.bits == 255) / mask.bits.size


def segment(img: RasterImage, rng: HsvRange, blur_sigma=None) -> Tuple[BinaryMask, float]:
    """Optional blur, then HSV mask and its coverage fraction."""
    if blur_sigma is not None:
        img = gaussian_blur(img, blur_sigma)
    mask = apply_hsv_mask(rgb_to_hsv(img), rng)
    return mask, coverage_fraction(mask)


@dataclass(frozen=True)
class CalibrationEntry:
    range: HsvRange
    mask: BinaryMask
    fraction: float


def calibration_grid(img: RasterImage, candidates: Sequence[HsvRange]) -> List[CalibrationEntry]:
    """Mask previews for candidate ranges, in the order given.

    Replaces an interactive slider: write the masks out, look at them once,
    and record the chosen range in the config file.
    """
    if not candidates:
        raise ParameterError("calibration_grid needs at least one candidate range")
    grid = rgb_to_hsv(img)
    entries = []
    for cand in candidates:
        mask = apply_hsv_mask(grid, cand)
        entries.append(CalibrationEntry(cand, mask, coverage_fraction(mask)))
    return entries
