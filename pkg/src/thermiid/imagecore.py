"""Dense image grids and the differential/filtering operators built on them.

Images are plain float64 numpy arrays: ``(H, W)`` for single-channel fields
and ``(H, W, k)`` for k-channel fields.  Borders are handled by half-sample
reflection (``a b c | c b a``) everywhere.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import DegenerateRangeError, InvalidInputError

_LAPLACE_STENCIL = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


class GradientField(NamedTuple):
    gx: np.ndarray
    gy: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.gx, self.gy)


def as_image(image, name="image") -> np.ndarray:
    """Validate and convert to a float64 array of rank 2 or 3."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim not in (2, 3) or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty (H, W) or (H, W, k) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def _single_channel(image, name="image") -> np.ndarray:
    arr = as_image(image, name)
    if arr.ndim == 3:
        if arr.shape[2] != 1:
            raise InvalidInputError(f"{name} must be single-channel, got {arr.shape[2]} channels")
        arr = arr[..., 0]
    return arr


def channels(image: np.ndarray) -> int:
    return 1 if image.ndim == 2 else image.shape[2]


def to_grayscale(image) -> np.ndarray:
    """Unweighted per-pixel mean over channels; single-channel input is returned as-is."""
    arr = as_image(image)
    if arr.ndim == 2:
        return arr
    return arr.mean(axis=2)


def gradient(image) -> GradientField:
    """Central differences in the interior, one-sided differences on the border."""
    arr = _single_channel(image)
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise InvalidInputError(f"gradient needs at least 2x2 pixels, got {arr.shape}")
    gy, gx = np.gradient(arr)
    return GradientField(gx, gy)


def _diff_adjoint(w: np.ndarray, axis: int) -> np.ndarray:
    w = np.moveaxis(w, axis, 0)
    out = np.zeros_like(w)
    out[2:] += 0.5 * w[1:-1]
    out[:-2] -= 0.5 * w[1:-1]
    out[0] -= w[0]
    out[1] += w[0]
    out[-2] -= w[-1]
    out[-1] += w[-1]
    return np.moveaxis(out, 0, axis)


def gradient_adjoint(wx: np.ndarray, wy: np.ndarray) -> np.ndarray:
    """Apply the transpose of :func:`gradient` to a pair of weight fields.

    For any field ``f``: ``sum(gx*wx + gy*wy) == sum(f * gradient_adjoint(wx, wy))``.
    Used to back-propagate losses defined on image gradients.
    """
    return _diff_adjoint(np.asarray(wx, dtype=np.float64), 1) + _diff_adjoint(np.asarray(wy, dtype=np.float64), 0)


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(image, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with kernel radius ceil(3*sigma) over the two spatial axes."""
    arr = as_image(image)
    if sigma < 0 or not math.isfinite(sigma):
        raise InvalidInputError(f"sigma must be finite and >= 0, got {sigma}")
    if sigma == 0:
        return arr.copy()
    kernel = gaussian_kernel(sigma)
    out = ndimage.correlate1d(arr, kernel, axis=0, mode="reflect")
    return ndimage.correlate1d(out, kernel, axis=1, mode="reflect")


def laplacian(image) -> np.ndarray:
    """Five-point Laplacian on a unit lattice."""
    arr = _single_channel(image)
    if arr.shape[0] < 3 or arr.shape[1] < 3:
        raise InvalidInputError(f"laplacian needs at least 3x3 pixels, got {arr.shape}")
    return ndimage.correlate(arr, _LAPLACE_STENCIL, mode="reflect")


def normalize01(image):
    """Affinely map an image onto [0, 1].

    Returns ``(normalized, lo, hi)`` so that ``image == lo + normalized * (hi - lo)``.
    """
    arr = as_image(image)
    lo = float(arr.min())
    hi = float(arr.max())
    if not hi > lo:
        raise DegenerateRangeError(f"cannot normalize a constant image (value {lo})")
    span = hi - lo
    return (arr - lo) / span, lo, hi


def percentile_range(image, low=2.0, high=98.0) -> float:
    """Spread between two percentiles, floored to the full range if it collapses."""
    arr = as_image(image)
    lo, hi = np.percentile(arr, [low, high])
    spread = float(hi - lo)
    if spread <= 0:
        spread = float(arr.max() - arr.min())
    return spread if spread > 0 else 1.0
