"""Preprocessing and robustness stack: residuals, distortions, augmentation.

The detector never sees raw pixels; it sees the noise residual (image minus
its median-blurred version), optionally after the standard robustness
distortions.  The augmentation policy gates each distortion independently
with 10% probability, then center-crops (reflect-padding when the image is
too small).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .ops import median_filter

# Standard 8x8 luminance quantization table (quality 50 reference).
JPEG_LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


def _as_channels(image: np.ndarray):
    """View an (H, W) or (C, H, W) array as (C, H, W) plus a squeeze flag."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image[None], True
    if image.ndim == 3:
        return image, False
    raise ParameterError(f"expected (H, W) or (C, H, W), got shape {image.shape}")


# ---------------------------------------------------------------------------
# Noise residual
# ---------------------------------------------------------------------------

def noise_residual(image: np.ndarray, k: int = 7) -> np.ndarray:
    """Image minus its median-blurred version, per channel."""
    planes, squeeze = _as_channels(image)
    out = np.stack([p - median_filter(p, k) for p in planes])
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# JPEG quantization round trip
# ---------------------------------------------------------------------------

def jpeg_quant_table(quality: int) -> np.ndarray:
    """Quality-scaled luminance quantization table (integer steps in [1, 255])."""
    if not 1 <= quality <= 100:
        raise ParameterError(f"quality must be in [1, 100], got {quality}")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    table = np.floor((JPEG_LUMA_TABLE * scale + 50) / 100)
    return np.clip(table, 1, 255)


def _dct_matrix() -> np.ndarray:
    x = np.arange(8)
    mat = np.cos((2 * x[None, :] + 1) * x[:, None] * np.pi / 16)
    mat *= np.sqrt(2.0 / 8.0)
    mat[0] *= np.sqrt(0.5)
    return mat


_DCT = _dct_matrix()


def jpeg_distort(image: np.ndarray, quality: int) -> np.ndarray:
    """Block-DCT quantization round trip at the given quality.

    Covers the pixel-level effect of JPEG compression: 8x8 DCT, quality
    scaled quantization of the luminance table, dequantization, inverse DCT.
    Entropy coding is lossless and therefore omitted; channels are coded
    independently (no chroma subsampling).
    """
    table = jpeg_quant_table(quality)
    planes, squeeze = _as_channels(image)
    c, h, w = planes.shape
    pad_h = (-h) % 8
    pad_w = (-w) % 8
    padded = np.pad(planes, ((0, 0), (0, pad_h), (0, pad_w)), mode="reflect")
    ph, pw = padded.shape[1:]
    levels = padded * 255.0 - 128.0
    blocks = levels.reshape(c, ph // 8, 8, pw // 8, 8).transpose(0, 1, 3, 2, 4)
    coefs = _DCT @ blocks @ _DCT.T
    coefs = np.rint(coefs / table) * table
    restored = _DCT.T @ coefs @ _DCT
    restored = restored.transpose(0, 1, 3, 2, 4).reshape(c, ph, pw)
    out = np.clip((restored[:, :h, :w] + 128.0) / 255.0, 0.0, 1.0)
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# Gaussian blur and bilinear downsampling
# ---------------------------------------------------------------------------

def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, kernel radius ceil(3*sigma), reflect borders."""
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    planes, squeeze = _as_channels(image)
    if sigma == 0:
        return planes[0].copy() if squeeze else planes.copy()
    radius = int(np.ceil(3 * sigma))
    taps = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    taps /= taps.sum()

    def blur_axis(x, axis):
        xp = np.pad(
            x,
            [(0, 0)] * axis + [(radius, radius)] + [(0, 0)] * (x.ndim - axis - 1),
            mode="reflect",
        )
        out = np.zeros_like(x)
        n = x.shape[axis]
        for i, tap in enumerate(taps):
            sl = [slice(None)] * x.ndim
            sl[axis] = slice(i, i + n)
            out += tap * xp[tuple(sl)]
        return out

    out = blur_axis(blur_axis(planes, 1), 2)
    return out[0] if squeeze else out


def downsample(image: np.ndarray, ratio: float = 0.5) -> np.ndarray:
    """Bilinear resampling to half size (half-pixel centers)."""
    if ratio != 0.5:
        raise ParameterError(f"only ratio 0.5 is supported, got {ratio}")
    planes, squeeze = _as_channels(image)

    def axis_weights(n, n_out):
        src = (np.arange(n_out) + 0.5) * (n / n_out) - 0.5
        i0 = np.clip(np.floor(src).astype(int), 0, n - 1)
        i1 = np.minimum(i0 + 1, n - 1)
        frac = np.clip(src - i0, 0.0, 1.0)
        return i0, i1, frac

    c, h, w = planes.shape
    h_out, w_out = (h + 1) // 2, (w + 1) // 2
    r0, r1, rf = axis_weights(h, h_out)
    rows = planes[:, r0, :] * (1 - rf)[None, :, None] + planes[:, r1, :] * rf[None, :, None]
    c0, c1, cf = axis_weights(w, w_out)
    out = rows[:, :, c0] * (1 - cf)[None, None, :] + rows[:, :, c1] * cf[None, None, :]
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# Crop / pad
# ---------------------------------------------------------------------------

def center_crop_pad(image: np.ndarray, size: int = 224) -> np.ndarray:
    """Center crop to size x size; reflect-pad first when too small."""
    planes, squeeze = _as_channels(image)
    c, h, w = planes.shape
    pad_h = max(size - h, 0)
    pad_w = max(size - w, 0)
    if pad_h or pad_w:
        planes = np.pad(
            planes,
            (
                (0, 0),
                (pad_h // 2, pad_h - pad_h // 2),
                (pad_w // 2, pad_w - pad_w // 2),
            ),
            mode="reflect",
        )
        h, w = planes.shape[1:]
    top = (h - size) // 2
    left = (w - size) // 2
    out = planes[:, top:top + size, left:left + size]
    return out[0].copy() if squeeze else out.copy()


# ---------------------------------------------------------------------------
# Distortion and augmentation policies
# ---------------------------------------------------------------------------

DISTORTION_KINDS = ("none", "jpeg", "downsample", "gaussian_blur")


@dataclass(frozen=True)
class DistortionConfig:
    """One evaluation-time distortion."""

    kind: str = "none"
    jpeg_quality: int = 95
    down_ratio: float = 0.5
    blur_sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in DISTORTION_KINDS:
            raise ParameterError(f"unknown distortion kind {self.kind!r}")

    @property
    def label(self) -> str:
        return {
            "none": "none",
            "jpeg": f"jpeg{self.jpeg_quality}",
            "downsample": f"down{self.down_ratio}",
            "gaussian_blur": f"blur{self.blur_sigma:g}",
        }[self.kind]

    def apply(self, image: np.ndarray) -> np.ndarray:
        if self.kind == "jpeg":
            return jpeg_distort(image, self.jpeg_quality)
        if self.kind == "downsample":
            return downsample(image, self.down_ratio)
        if self.kind == "gaussian_blur":
            return gaussian_blur(image, self.blur_sigma)
        return np.asarray(image, dtype=np.float64)


@dataclass
class AugmentPolicy:
    """Training-time augmentation gates, each fired independently."""

    p_jpeg: float = 0.1
    p_blur: float = 0.1
    p_down: float = 0.1
    jpeg_quality_range: tuple = (70, 100)  # uniform integers, inclusive
    blur_sigma_range: tuple = (0.0, 1.0)
    down_ratio: float = 0.5
    crop: int = 224
    seed: int = 0

    def __post_init__(self):
        for p in (self.p_jpeg, self.p_blur, self.p_down):
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"gate probability {p} outside [0, 1]")
        lo, hi = self.jpeg_quality_range
        if not (1 <= lo <= hi <= 100):
            raise ParameterError(f"bad jpeg quality range {self.jpeg_quality_range}")


@dataclass
class AugmentPlan:
    """Concrete draw of the augmentation gates for one image."""

    jpeg_quality: int | None = None
    blur_sigma: float | None = None
    downsample: bool = False


def draw_augment_plan(policy: AugmentPolicy, rng: np.random.Generator) -> AugmentPlan:
    """Sample the three independent gates (fixed draw order: jpeg, blur, down)."""
    gates = rng.random(3)
    plan = AugmentPlan()
    if gates[0] < policy.p_jpeg:
        lo, hi = policy.jpeg_quality_range
        plan.jpeg_quality = int(rng.integers(lo, hi + 1))
    if gates[1] < policy.p_blur:
        lo, hi = policy.blur_sigma_range
        plan.blur_sigma = float(lo + (hi - lo) * rng.random())
    if gates[2] < policy.p_down:
        plan.downsample = True
    return plan


def apply_augment_plan(image: np.ndarray, plan: AugmentPlan, policy: AugmentPolicy) -> np.ndarray:
    out = np.asarray(image, dtype=np.float64)
    if plan.jpeg_quality is not None:
        out = jpeg_distort(out, plan.jpeg_quality)
    if plan.blur_sigma is not None:
        out = gaussian_blur(out, plan.blur_sigma)
    if plan.downsample:
        out = downsample(out, policy.down_ratio)
    return center_crop_pad(out, policy.crop)


def augment(image: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator) -> np.ndarray:
    """Randomly distort then center-crop/pad one image (deterministic per rng state)."""
    return apply_augment_plan(image, draw_augment_plan(policy, rng), policy)
