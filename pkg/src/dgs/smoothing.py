"""Distribution smoothing for per-class difficulty values.

Generated image pools cluster around easy difficulty values, which starves
several intervals during distribution-matched sampling. Smoothing spreads a
class's difficulties with a variable-base logarithmic transform,

    f(v) = ln(v / min) / ln(max / min),

after removing the b lowest- and t highest-ranked values, which would
otherwise dominate the base. The thresholds (b, t) are chosen by exhaustive
grid search minimizing a weighted sum of two KL divergences: one against the
class's original histogram (deviation) and one against the uniform histogram
(smoothness).

Clipped items are not discarded: bottom-clipped items map to 0, top-clipped
items to 1, so every item keeps a transformed difficulty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import NUM_INTERVALS, bin_indices, histogram
from .errors import DegenerateDistribution, DomainError
from .manifest import Manifest

DEFAULT_GRID_MAX_PERCENT = 20
VALUE_FLOOR = 1e-9
KL_EPS = 1e-12


@dataclass(frozen=True)
class ClipSpec:
    """Number of lowest-rank (b) and highest-rank (t) samples to remove."""

    b: int
    t: int

    def __post_init__(self):
        if self.b < 0 or self.t < 0:
            raise DomainError(f"clip counts must be nonnegative, got b={self.b}, t={self.t}")

    def validate_for(self, n: int) -> None:
        if self.b + self.t >= n:
            raise DomainError(f"clip b+t={self.b + self.t} must be smaller than N={n}")


@dataclass(frozen=True)
class SmoothingResult:
    """Outcome of smoothing one class.

    ``transformed`` is aligned to the input item order. ``objective`` and the
    two KL terms are None when the class was degenerate (fewer than 3
    distinct values) and passed through untransformed.
    """

    label: str
    clip: ClipSpec
    transformed: tuple[float, ...]
    objective: float | None
    kl_to_original: float | None
    kl_to_uniform: float | None
    lam: float
    retained_min: float | None = None
    retained_max: float | None = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "b": self.clip.b,
            "t": self.clip.t,
            "lambda": self.lam,
            "objective": self.objective,
            "kl_to_original": self.kl_to_original,
            "kl_to_uniform": self.kl_to_uniform,
            "degenerate": self.degenerate,
        }


def _check_lambda(lam) -> float:
    if isinstance(lam, bool) or not isinstance(lam, (int, float)):
        raise DomainError(f"lambda must be a number, got {lam!r}")
    if math.isnan(lam) or not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam!r}")
    return float(lam)


def _rank_order(difficulties, ids):
    """Indices sorted ascending by (difficulty, id); id breaks ties."""
    if ids is None:
        ids = range(len(difficulties))
    keyed = sorted(range(len(difficulties)), key=lambda i: (difficulties[i], str(ids[i])))
    return keyed


def clip_marks(difficulties, spec: ClipSpec, ids=None) -> np.ndarray:
    """Per-item mark in original order: -1 bottom-clipped, 0 retained, +1 top-clipped."""
    values = list(difficulties)
    n = len(values)
    spec.validate_for(n)
    marks = np.zeros(n, dtype=int)
    order = _rank_order(values, ids)
    for rank0, idx in enumerate(order):
        if rank0 < spec.b:
            marks[idx] = -1
        elif rank0 >= n - spec.t:
            marks[idx] = 1
    return marks


def clip(difficulties, spec: ClipSpec, ids=None) -> list[bool]:
    """Retained flag per item (original order) after rank-based clipping."""
    return [m == 0 for m in clip_marks(difficulties, spec, ids)]


def log_transform(values, floor: float = VALUE_FLOOR) -> np.ndarray:
    """Variable-base log transform mapping [min, max] onto [0, 1].

    Values below ``floor`` are raised to it first (difficulty 0 is common
    for perfectly classified items and the logarithm needs a positive
    argument).
    """
    vals = np.asarray(list(values), dtype=float)
    if vals.size < 2:
        raise DegenerateDistribution("log transform needs at least 2 retained values")
    if (vals < 0).any():
        raise DomainError("log transform requires nonnegative values")
    vals = np.maximum(vals, floor)
    vmin = float(vals.min())
    vmax = float(vals.max())
    if vmax <= vmin:
        raise DegenerateDistribution("retained values are constant; transform base undefined")
    # vectorized log is not correctly rounded, so the ratio can miss the
    # endpoints by an ulp; clamp and pin the extremes exactly
    out = np.clip(np.log(vals / vmin) / math.log(vmax / vmin), 0.0, 1.0)
    out[vals == vmin] = 0.0
    out[vals == vmax] = 1.0
    return out


def kl_divergence(p, q, eps: float = KL_EPS) -> float:
    """KL divergence of histogram p from q, with epsilon smoothing.

    Both histograms get ``eps`` added to every bin and are normalized before
    the divergence is computed, so empty bins are tolerated.
    """
    p = np.asarray(list(p), dtype=float)
    q = np.asarray(list(q), dtype=float)
    if p.shape != q.shape or p.ndim != 1 or p.size == 0:
        raise DomainError("histograms must be non-empty and of equal length")
    if (p < 0).any() or (q < 0).any():
        raise DomainError("histogram bins must be nonnegative")
    if p.sum() <= 0 or q.sum() <= 0:
        raise DegenerateDistribution("histogram has zero total")
    ps = p + eps
    qs = q + eps
    ps /= ps.sum()
    qs /= qs.sum()
    result = float(np.sum(ps * (np.log(ps) - np.log(qs))))
    if result < 0:
        if result < -1e-9:
            raise AssertionError(f"KL divergence computed negative: {result}")
        result = 0.0
    return result


def smoothing_objective(difficulties, spec: ClipSpec, lam: float,
                        ids=None, label: str = "") -> SmoothingResult:
    """Clip, transform, and score one (b, t) choice.

    The objective is lam * KL(transformed hist, original hist)
    + (1 - lam) * KL(transformed hist, uniform). Bottom-clipped items are
    pinned to 0, top-clipped to 1.
    """
    lam = _check_lambda(lam)
    values = np.asarray(list(difficulties), dtype=float)
    marks = clip_marks(values, spec, ids)
    retained = values[marks == 0]
    transformed = np.empty_like(values)
    transformed[marks == -1] = 0.0
    transformed[marks == 1] = 1.0
    transformed[marks == 0] = log_transform(retained)

    original_hist = histogram(values, label).counts
    smoothed_hist = histogram(transformed, label).counts
    uniform = (1,) * NUM_INTERVALS
    kl_o = kl_divergence(smoothed_hist, original_hist)
    kl_u = kl_divergence(smoothed_hist, uniform)
    return SmoothingResult(
        label=label,
        clip=spec,
        transformed=tuple(transformed.tolist()),
        objective=lam * kl_o + (1.0 - lam) * kl_u,
        kl_to_original=kl_o,
        kl_to_uniform=kl_u,
        lam=lam,
        retained_min=max(float(retained.min()), VALUE_FLOOR),
        retained_max=max(float(retained.max()), VALUE_FLOOR),
    )


def _grid_counts(n: int, grid) -> list[int]:
    """Map percent steps to distinct clip counts for a class of size n."""
    counts = set()
    for pct in grid:
        if isinstance(pct, bool) or not isinstance(pct, int) or pct < 0 or pct > 100:
            raise DomainError(f"grid percents must be integers in 0..100, got {pct!r}")
        counts.add(n * pct // 100)
    return sorted(counts)


def search_thresholds(difficulties, lam: float, grid=None,
                      ids=None, label: str = "") -> SmoothingResult:
    """Exhaustive (b, t) grid search minimizing the smoothing objective.

    ``grid`` is an iterable of percent steps applied to both sides; counts
    are floor(N * pct / 100). Ties are broken by smaller b, then smaller t.
    Raises DegenerateDistribution when fewer than 3 distinct values exist or
    every grid point leaves a constant retained set.
    """
    lam = _check_lambda(lam)
    values = list(difficulties)
    n = len(values)
    if len(set(values)) < 3:
        raise DegenerateDistribution(
            f"class {label!r}: need at least 3 distinct difficulty values, got {len(set(values))}"
        )
    grid = range(DEFAULT_GRID_MAX_PERCENT + 1) if grid is None else list(grid)
    side = _grid_counts(n, grid)

    # score candidates on rank-sorted slices: the transformed histogram is
    # order independent, so this reproduces smoothing_objective bit for bit
    # while sorting and binning the originals only once
    arr = np.asarray(values, dtype=float)
    ranked = arr[_rank_order(values, ids)]
    original_hist = histogram(arr, label).counts
    uniform = (1,) * NUM_INTERVALS

    best_objective: float | None = None
    best_bt: tuple[int, int] | None = None
    for b in side:
        for t in side:
            if b + t >= n:
                continue
            retained = ranked[b:n - t]
            floored = np.maximum(retained, VALUE_FLOOR)
            if retained.size < 2 or floored[-1] <= floored[0]:
                continue
            counts = np.bincount(bin_indices(log_transform(retained)),
                                 minlength=NUM_INTERVALS)
            counts[0] += b
            counts[NUM_INTERVALS - 1] += t
            kl_o = kl_divergence(counts, original_hist)
            kl_u = kl_divergence(counts, uniform)
            objective = lam * kl_o + (1.0 - lam) * kl_u
            if best_objective is None or objective < best_objective:
                best_objective = objective
                best_bt = (b, t)
    if best_bt is None:
        raise DegenerateDistribution(f"class {label!r}: every grid point is degenerate")
    return smoothing_objective(values, ClipSpec(*best_bt), lam, ids=ids, label=label)


def _passthrough(values, lam: float, label: str) -> SmoothingResult:
    return SmoothingResult(
        label=label,
        clip=ClipSpec(0, 0),
        transformed=tuple(float(v) for v in values),
        objective=None,
        kl_to_original=None,
        kl_to_uniform=None,
        lam=lam,
        degenerate=True,
    )


def smooth_dataset(manifest: Manifest, lam: float = 0.5, grid=None) -> dict[str, SmoothingResult]:
    """Run the threshold search independently for every class of a manifest.

    Classes with fewer than 3 distinct difficulty values cannot be
    transformed; they are passed through unchanged and flagged degenerate in
    the result.
    """
    lam = _check_lambda(lam)
    results: dict[str, SmoothingResult] = {}
    for label, items in sorted(manifest.by_label().items()):
        values = [item.difficulty for item in items]
        ids = [item.id for item in items]
        try:
            results[label] = search_thresholds(values, lam, grid=grid, ids=ids, label=label)
        except DegenerateDistribution:
            results[label] = _passthrough(values, lam, label)
    return results
