"""Pixelwise evaluation of a segmentation against ground truth.

Confusion counts, the usual three ratios, root-mean-square difference,
the square-root mean-absolute-dispersion statistic, and ROC/AUC over the
quantized response levels.  Zero-denominator metrics are reported as None
rather than coerced to 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import BinaryImage, GrayImage, quantize_levels


class UndefinedRocError(ValueError):
    """Ground truth is single-class inside the scope; no curve exists."""


@dataclass
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class MetricsReport:
    """One image's scores; None marks an undefined (0/0) metric."""

    sensitivity: float | None
    specificity: float | None
    accuracy: float | None
    rmsd: float
    mad_seg: float
    mad_gt: float
    auc: float | None = None

    @property
    def mad_diff(self) -> float:
        return abs(self.mad_seg - self.mad_gt)


@dataclass
class RocCurve:
    """(fpr, tpr) points sorted by fpr, from (0, 0) to (1, 1)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"expected (n, 2) points, got shape {pts.shape}")
        self.points = pts


def _check_dims(a, b, what="images"):
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"{what} differ in size: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def confusion(seg: BinaryImage, gt: BinaryImage,
              scope: BinaryImage | None = None) -> ConfusionCounts:
    """Count agreement over scope-true pixels (all pixels when absent)."""
    _check_dims(seg, gt)
    s, g = seg.data, gt.data
    if scope is not None:
        _check_dims(seg, scope, "scope and image")
        s, g = s[scope.data], g[scope.data]
    return ConfusionCounts(
        tp=int(np.count_nonzero(s & g)),
        tn=int(np.count_nonzero(~s & ~g)),
        fp=int(np.count_nonzero(s & ~g)),
        fn=int(np.count_nonzero(~s & g)),
    )


def basic_metrics(c: ConfusionCounts):
    """(sensitivity, specificity, accuracy); None where a denominator is 0."""
    sens = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else None
    spec = c.tn / (c.tn + c.fp) if c.tn + c.fp > 0 else None
    acc = (c.tp + c.tn) / c.total if c.total > 0 else None
    return sens, spec, acc


def rmsd(seg: BinaryImage, gt: BinaryImage) -> float:
    """Root mean square of the pixel differences; 0 iff the maps coincide."""
    _check_dims(seg, gt)
    diff = seg.data.astype(np.float64) - gt.data.astype(np.float64)
    return float(np.sqrt(np.mean(diff ** 2)))


def mad(image, *, root: bool = True) -> float:
    """Square root of the mean absolute deviation from the image mean.

    ``root=False`` gives the conventional mean-absolute-deviation for
    cross-checks.  The comparison statistic between two maps is the absolute
    difference of their values.
    """
    data = np.asarray(image.data, dtype=np.float64)
    dispersion = float(np.mean(np.abs(data - data.mean())))
    return float(np.sqrt(dispersion)) if root else dispersion


def roc_curve(response: GrayImage, gt: BinaryImage,
              scope: BinaryImage | None = None) -> RocCurve:
    """Sweep the 256 quantized levels descending; classify level > t as vessel.

    Points are (fpr, tpr) per threshold with (0, 0) prepended and (1, 1)
    appended.
    """
    _check_dims(response, gt)
    levels = quantize_levels(response.data)
    truth = gt.data
    if scope is not None:
        _check_dims(response, scope, "scope and image")
        levels = levels[scope.data]
        truth = truth[scope.data]
    levels = levels.ravel()
    truth = truth.ravel()

    pos = int(np.count_nonzero(truth))
    neg = truth.size - pos
    if pos == 0 or neg == 0:
        raise UndefinedRocError(
            "ROC curve undefined: ground truth is single-class in scope"
        )

    pos_hist = np.bincount(levels[truth], minlength=256)
    neg_hist = np.bincount(levels[~truth], minlength=256)
    # pixels with level > t, accumulated from the top level downward
    pos_above = np.cumsum(pos_hist[::-1])[::-1] - pos_hist
    neg_above = np.cumsum(neg_hist[::-1])[::-1] - neg_hist

    points = [(0.0, 0.0)]
    for t in range(255, -1, -1):
        points.append((neg_above[t] / neg, pos_above[t] / pos))
    points.append((1.0, 1.0))
    return RocCurve(points=np.array(points))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve over fpr in [0, 1]."""
    fpr = curve.points[:, 0]
    tpr = curve.points[:, 1]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1])) / 2.0)


def evaluate_pair(seg: BinaryImage, gt: BinaryImage,
                  response: GrayImage | None = None,
                  scope: BinaryImage | None = None) -> MetricsReport:
    """Assemble the full per-image report; AUC only when a response is given."""
    sens, spec, acc = basic_metrics(confusion(seg, gt, scope))
    area = None
    if response is not None:
        try:
            area = auc(roc_curve(response, gt, scope))
        except UndefinedRocError:
            area = None
    return MetricsReport(
        sensitivity=sens,
        specificity=spec,
        accuracy=acc,
        rmsd=rmsd(seg, gt),
        mad_seg=mad(seg),
        mad_gt=mad(gt),
        auc=area,
    )
