"""Synthetic fundus-like images with known vessel masks.

Dark strokes with a Gaussian cross-profile on a bright field inside a
circular field of view, plus seeded additive noise.  The generator doubles
as its own ground-truth oracle: the vessel mask marks pixels within a fixed
half-width of a stroke centerline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import BinaryImage, RgbImage


@dataclass
class Phantom:
    rgb: RgbImage
    fov: BinaryImage
    vessels: BinaryImage


def _segment_distance(rows, cols, p0, p1):
    """Distance from every pixel to the segment p0-p1 (row/col coordinates)."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    d = p1 - p0
    length_sq = float(d @ d)
    pr = rows - p0[0]
    pc = cols - p0[1]
    if length_sq == 0.0:
        return np.hypot(pr, pc)
    t = np.clip((pr * d[0] + pc * d[1]) / length_sq, 0.0, 1.0)
    return np.hypot(pr - t * d[0], pc - t * d[1])


def default_strokes(size: int):
    """Three strokes (vertical, horizontal, diagonal), each 40+ px long."""
    s = size
    return [
        ((0.15 * s, 0.32 * s), (0.85 * s, 0.32 * s)),
        ((0.62 * s, 0.18 * s), (0.62 * s, 0.84 * s)),
        ((0.20 * s, 0.45 * s), (0.80 * s, 0.88 * s)),
    ]


def generate_phantom(size: int = 128, seed: int = 0, background: float = 0.8,
                     depth: float = 0.3, profile_sigma: float = 1.5,
                     noise_sigma: float = 0.02, strokes=None,
                     gt_halfwidth: float = 2.0,
                     fov_radius: float | None = None) -> Phantom:
    """Build one phantom; ``strokes=[]`` gives a pure-background image.

    Strokes are ((r0, c0), (r1, c1)) centerline segments; each subtracts a
    Gaussian dip of the given depth and cross-profile scale from the field.
    """
    if strokes is None:
        strokes = default_strokes(size)
    if fov_radius is None:
        fov_radius = size / 2.0 - 8.0

    rows, cols = np.meshgrid(np.arange(size, dtype=np.float64),
                             np.arange(size, dtype=np.float64), indexing="ij")
    center = (size - 1) / 2.0
    fov = np.hypot(rows - center, cols - center) <= fov_radius

    field = np.full((size, size), background)
    gt = np.zeros((size, size), dtype=bool)
    for p0, p1 in strokes:
        dist = _segment_distance(rows, cols, p0, p1)
        field -= depth * np.exp(-(dist ** 2) / (2.0 * profile_sigma ** 2))
        gt |= dist <= gt_halfwidth
    gt &= fov

    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        field = field + rng.normal(0.0, noise_sigma, field.shape)
    field = np.clip(field, 0.0, 1.0)

    level = np.floor(field * 255.0 + 0.5).astype(np.uint8)
    rgb = np.repeat(level[:, :, None], 3, axis=2)
    return Phantom(
        rgb=RgbImage.from_array(rgb),
        fov=BinaryImage.from_array(fov),
        vessels=BinaryImage.from_array(gt),
    )
