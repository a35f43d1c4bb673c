"""Spectrum construction and fractal self-similarity statistics.

All spectra live in the unshifted DFT layout (DC bin at index [0, 0]).  In
that layout, 2x zero-insertion upsampling tiles the spectrum exactly into a
2x2 block grid, so the four contiguous quadrants of an upsampled image's
spectrum are filtered copies of one another.  The statistics below quantify
that agreement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError, ParameterError
from .fft import dft2_magnitude

MEASURES = ("mean", "logmean")


def spectrum_of(image: np.ndarray) -> np.ndarray:
    """Per-channel magnitude spectrum of an (..., H, W) image, unshifted."""
    return dft2_magnitude(image)


def quadrant_split(spectrum: np.ndarray):
    """Split the trailing two axes into four contiguous (H/2, W/2) blocks.

    Returns (s00, s01, s10, s11) in index order: s00 covers rows [0, H/2) and
    columns [0, W/2), s01 the high columns, s10 the high rows, s11 both.
    """
    spectrum = np.asarray(spectrum)
    h, w = spectrum.shape[-2:]
    if h % 2 or w % 2:
        raise DimensionError(f"quadrant split needs even extents, got {h}x{w}")
    hh, hw = h // 2, w // 2
    return (
        spectrum[..., :hh, :hw],
        spectrum[..., :hh, hw:],
        spectrum[..., hh:, :hw],
        spectrum[..., hh:, hw:],
    )


def quadrant_average(s00, s01, s10, s11) -> np.ndarray:
    """Elementwise mean of four equally shaped branches."""
    blocks = [np.asarray(b) for b in (s00, s01, s10, s11)]
    shape = blocks[0].shape
    for b in blocks[1:]:
        if b.shape != shape:
            raise DimensionError(f"branch shape mismatch: {b.shape} vs {shape}")
    # Pairwise tree keeps the average of four identical blocks bit-exact.
    return ((blocks[0] + blocks[1]) + (blocks[2] + blocks[3])) / 4.0


def self_similarity(spectrum: np.ndarray, measure: str = "logmean") -> float:
    """Scalar agreement of the four spectrum quadrants.

    Each quadrant is first scaled to unit mean (an all-zero quadrant stays
    zero), so the statistic measures structural agreement rather than raw
    spectral energy and is invariant to image brightness and size.  The
    scaled quadrants are fused by elementwise multiplication; ``measure``
    reduces the fused map: ``mean`` is the plain average, ``logmean``
    (default) averages log(1 + product), which tames the heavy tail of
    magnitude products.
    """
    if measure not in MEASURES:
        raise ParameterError(f"unknown measure {measure!r}; pick from {MEASURES}")
    scaled = []
    for block in quadrant_split(spectrum):
        block = np.asarray(block, dtype=np.float64)
        m = block.mean()
        scaled.append(block / m if m > 0 else block)
    fused = scaled[0] * scaled[1] * scaled[2] * scaled[3]
    if measure == "mean":
        return float(np.mean(fused))
    return float(np.mean(np.log1p(fused)))


@dataclass
class FractalPyramid:
    """Recursive quadrant-average decomposition of a spectrum.

    ``levels[0]`` is the input spectrum; each subsequent level is the
    elementwise mean of the previous level's four quadrants, halving the
    spatial extents.
    """

    levels: list

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def self_similarities(self, measure: str = "logmean") -> np.ndarray:
        """Per-level scalar statistic S(0)..S(depth).

        Every level, including the coarsest, is quadrant-split once more for
        its statistic, so the base extents must be divisible by
        2**(depth + 1).
        """
        return np.array([self_similarity(lv, measure) for lv in self.levels])


def fractal_pyramid(spectrum: np.ndarray, n_levels: int) -> FractalPyramid:
    """Build the recursive pyramid with ``n_levels`` halvings (n_levels + 1 levels)."""
    spectrum = np.asarray(spectrum)
    if n_levels < 0:
        raise ParameterError(f"n_levels must be >= 0, got {n_levels}")
    h, w = spectrum.shape[-2:]
    div = 1 << n_levels
    if h % div or w % div:
        raise ParameterError(
            f"extents {h}x{w} not divisible by 2^{n_levels}; cannot split that deep"
        )
    if n_levels and min(h, w) // div < 2:
        raise ParameterError(
            f"{n_levels} levels would shrink {h}x{w} below a 2x2 coarsest level"
        )
    levels = [spectrum]
    for _ in range(n_levels):
        levels.append(quadrant_average(*quadrant_split(levels[-1])))
    return FractalPyramid(levels)


def self_similarity_features(
    spectrum: np.ndarray, n_levels: int, measure: str = "logmean"
) -> np.ndarray:
    """Concatenated per-level self-similarity statistics S(0)..S(n_levels)."""
    return fractal_pyramid(spectrum, n_levels).self_similarities(measure)


def average_spectrum(images, residual_fn=None) -> np.ndarray:
    """Elementwise mean of per-image magnitude spectra.

    ``images`` is any iterable of equally sized arrays.  When ``residual_fn``
    is given it is applied to each image first (e.g. a noise-residual
    extractor), so the average is taken over residual spectra instead.
    """
    total = None
    count = 0
    for image in images:
        image = np.asarray(image, dtype=np.float64)
        if residual_fn is not None:
            image = residual_fn(image)
        mag = spectrum_of(image)
        if total is None:
            total = mag
        elif total.shape != mag.shape:
            raise DimensionError(
                f"corpus images disagree in size: {mag.shape} vs {total.shape}"
            )
        else:
            total += mag
        count += 1
    if count == 0:
        raise DataError("cannot average an empty corpus")
    return total / count


def quadrant_correlation(spectrum: np.ndarray) -> float:
    """Mean pairwise normalized cross-correlation of the four quadrants.

    1.0 means the quadrants are identical up to affine scaling; white-noise
    spectra score near 0.
    """
    blocks = [np.asarray(b, dtype=np.float64).ravel() for b in quadrant_split(spectrum)]
    coefs = []
    for i in range(4):
        for j in range(i + 1, 4):
            a = blocks[i] - blocks[i].mean()
            b = blocks[j] - blocks[j].mean()
            denom = np.linalg.norm(a) * np.linalg.norm(b)
            coefs.append(float(a @ b / denom) if denom > 0 else 0.0)
    return float(np.mean(coefs))


def shift_center(spectrum: np.ndarray) -> np.ndarray:
    """Move the DC bin to the array center (visualization layout)."""
    spectrum = np.asarray(spectrum)
    h, w = spectrum.shape[-2:]
    return np.roll(spectrum, (h // 2, w // 2), axis=(-2, -1))


def export_view(spectrum: np.ndarray) -> np.ndarray:
    """Log-scaled, centered, max-normalized copy of a spectrum in [0, 1]."""
    view = np.log1p(np.asarray(spectrum, dtype=np.float64))
    view = shift_center(view)
    peak = view.max()
    if peak > 0:
        view = view / peak
    return view
