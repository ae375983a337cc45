"""Filter response aggregation across the oriented kernel bank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import GrayImage
from .kernels import Kernel, KernelBank


@dataclass
class ResponseImage:
    """Per-pixel maximum filter response and the orientation that won it."""

    width: int
    height: int
    response: np.ndarray            # (height, width) float64, unbounded
    best_orientation: np.ndarray    # (height, width) orientation indices


def convolve(image: GrayImage, kernel: Kernel) -> np.ndarray:
    """Direct correlation of the image with one kernel.

    out(r, c) = sum over grid offsets (dv, du) of
    weights(dv, du) * img(r + dv, c + du), with out-of-bounds pixels
    replicated from the nearest edge and weights indexed from the kernel
    center.
    """
    kh, kw = kernel.weights.shape
    if image.height < kh or image.width < kw:
        raise ValueError(
            f"image {image.width}x{image.height} smaller than kernel {kw}x{kh}"
        )
    return ndimage.correlate(image.data, kernel.weights, mode="nearest")


def max_response(image: GrayImage, bank: KernelBank) -> ResponseImage:
    """Pointwise maximum over all orientation responses.

    Ties go to the lowest orientation index, which keeps the winner map
    deterministic.
    """
    stack = np.stack([convolve(image, k) for k in bank.kernels])
    return ResponseImage(
        width=image.width,
        height=image.height,
        response=stack.max(axis=0),
        best_orientation=stack.argmax(axis=0),
    )


def normalize_response(resp: ResponseImage) -> GrayImage:
    """Min-max map of the response to [0, 1].

    A constant response carries no contrast to stretch; it maps to all
    zeros with the degenerate flag set.
    """
    lo = resp.response.min()
    hi = resp.response.max()
    if hi - lo <= 0.0:
        return GrayImage.from_array(
            np.zeros_like(resp.response), degenerate=True
        )
    return GrayImage.from_array((resp.response - lo) / (hi - lo))
