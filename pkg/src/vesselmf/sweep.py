"""Coarse-to-fine parameter search maximizing mean segmentation accuracy.

The truncation half-width and profile scale are searched jointly over three
rounds: a coarse grid, then a window of +/-0.5 at step 0.1 around the best
point (clamped to the coarse bounds), then +/-0.1 at step 0.01.  The
segment length gets its own one-dimensional integer scan.  The kernel bank
is rebuilt for every combination; nothing is cached across parameter
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .kernels import build_bank
from .metrics import basic_metrics, confusion
from .segment import PipelineParams, run_pipeline

# Lower clamp for both searched axes; keeps sigma and the truncation
# half-width positive in the fine rounds.
_MIN_AXIS_VALUE = 0.01


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """One inclusive-endpoint arithmetic grid: lo, lo+step, ... <= hi."""

    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"lo {self.lo} exceeds hi {self.hi}")
        if self.step <= 0:
            raise ValueError("step must be positive")

    def values(self) -> list[float]:
        n = int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return [self.lo + i * self.step for i in range(n)]


@dataclass
class SweepResult:
    """Full evaluation log plus the argmax tuple and per-round winners.

    Every entry is (x_limit, sigma, length, mean_accuracy); the log keeps
    grid order, so re-evaluations of a round's center appear once per round.
    """

    evaluations: list
    best: tuple
    round_bests: list


def evaluate_combo(dataset, params: PipelineParams) -> float:
    """Mean accuracy of the pipeline over (image, fov, gt) triples."""
    if not dataset:
        raise SweepError("empty dataset")
    bank = build_bank(params.kernel)
    accuracies = []
    for index, (image, fov, gt) in enumerate(dataset):
        try:
            result = run_pipeline(image, fov, params, bank)
            _, _, acc = basic_metrics(confusion(result.vessel_map, gt))
            if acc is None:
                raise ValueError("accuracy undefined (no pixels)")
        except Exception as exc:
            raise SweepError(
                f"combo x={params.kernel.x_limit} sigma={params.kernel.sigma} "
                f"L={params.kernel.length}: image #{index} failed: {exc}"
            ) from exc
        accuracies.append(acc)
    return float(np.mean(accuracies))


def _combo_params(base: PipelineParams, x_limit, sigma, length) -> PipelineParams:
    kernel = replace(base.kernel, x_limit=float(x_limit), sigma=float(sigma),
                     length=float(length))
    return replace(base, kernel=kernel)


def _run_grid(dataset, base, xs, sigmas, length, log):
    best = None
    for x in xs:
        for s in sigmas:
            acc = evaluate_combo(dataset, _combo_params(base, x, s, length))
            log.append((x, s, length, acc))
            if best is None or acc > best[3]:
                best = (x, s, length, acc)
    return best


def _window(center: float, radius: float, step: float,
            lo_bound: float | None, hi_bound: float | None) -> GridSpec:
    lo = center - radius
    hi = center + radius
    if lo_bound is not None:
        lo = max(lo, lo_bound)
    if hi_bound is not None:
        hi = min(hi, hi_bound)
    lo = max(lo, _MIN_AXIS_VALUE)
    return GridSpec(lo=lo, hi=hi, step=step)


def three_round_search(dataset, round1_x: GridSpec, round1_sigma: GridSpec,
                       length: float, base: PipelineParams) -> SweepResult:
    """Joint (x_limit, sigma) search at fixed length.

    Round 2 re-grids +/-0.5 around the round-1 winner at step 0.1 and round
    3 re-grids +/-0.1 at step 0.01, both clamped to the round-1 bounds so
    the search never leaves the declared domain.  Ties at every stage break
    to the lexicographically smallest (x, sigma).
    """
    log: list = []
    round_bests = []

    _run_grid(dataset, base, round1_x.values(), round1_sigma.values(),
              length, log)
    round_bests.append(_argmax(log))

    for radius, step in ((0.5, 0.1), (0.1, 0.01)):
        bx, bs = round_bests[-1][0], round_bests[-1][1]
        grid_x = _window(bx, radius, step, round1_x.lo, round1_x.hi)
        grid_s = _window(bs, radius, step, round1_sigma.lo, round1_sigma.hi)
        start = len(log)
        _run_grid(dataset, base, grid_x.values(), grid_s.values(), length, log)
        round_bests.append(_argmax(log[start:]))

    return SweepResult(evaluations=log, best=_argmax(log),
                       round_bests=round_bests)


def length_search(dataset, lengths, base: PipelineParams) -> SweepResult:
    """Scan integer segment lengths at fixed (x_limit, sigma).

    Ties break to the smallest length.
    """
    log: list = []
    x = base.kernel.x_limit
    s = base.kernel.sigma
    for length in lengths:
        acc = evaluate_combo(dataset, _combo_params(base, x, s, length))
        log.append((x, s, float(length), acc))
    if not log:
        raise SweepError("empty length grid")
    best = max(log, key=lambda e: (e[3], -e[2]))
    return SweepResult(evaluations=log, best=best, round_bests=[best])


def _argmax(entries):
    """Highest accuracy; ties to the lexicographically smallest (x, sigma)."""
    top = max(e[3] for e in entries)
    return min((e for e in entries if e[3] == top), key=lambda e: (e[0], e[1]))
