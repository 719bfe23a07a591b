"""Difficulty intervals, histograms and sampling plans.

The difficulty range [0, 1] is partitioned into 10 fixed intervals of width
0.1. Interval k covers [k/10, (k+1)/10) for k = 0..8; the top interval is
closed, [0.9, 1.0]. All binning in the package goes through this partition.

Sampling plans distribute an IPC budget (items per class) over the 10
intervals, either proportionally to an observed histogram ("scale") or
following one of four predefined weight templates. Rounding uses
largest-remainder (Hamilton) apportionment so targets always sum to the
budget exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistribution, DomainError

NUM_INTERVALS = 10
INTERVAL_WIDTH = 0.1

# lower edges computed as k/10 so they are the floats nearest the exact
# boundaries; linspace would accumulate a different rounding for 0.3
_LOWER_EDGES = np.array([k / 10 for k in range(NUM_INTERVALS)])

# weight templates over bins 0..9 (bin 0 = easiest); ordered by increasing
# share of mass in the easiest bin: hill < ground < slope < cliff
SHAPE_TEMPLATES: dict[str, tuple[int, ...]] = {
    "hill": (1, 2, 3, 4, 5, 5, 4, 3, 2, 1),
    "ground": (1, 1, 1, 1, 1, 1, 1, 1, 1, 1),
    "slope": (10, 9, 8, 7, 6, 5, 4, 3, 2, 1),
    "cliff": (40, 20, 10, 5, 2, 1, 1, 1, 0, 0),
}

PLAN_SHAPES = ("scale",) + tuple(SHAPE_TEMPLATES)


def interval_midpoint(k: int) -> float:
    """Center of interval k."""
    if not 0 <= k < NUM_INTERVALS:
        raise DomainError(f"interval index {k} outside 0..{NUM_INTERVALS - 1}")
    return (2 * k + 1) / (2 * NUM_INTERVALS)


def bin_index(d: float) -> int:
    """Interval index of a difficulty value.

    Lower-inclusive half-open intervals, except the top interval which also
    contains 1.0.
    """
    if isinstance(d, bool) or not isinstance(d, (int, float, np.floating, np.integer)):
        raise DomainError(f"difficulty must be a number, got {d!r}")
    if math.isnan(d) or not 0.0 <= d <= 1.0:
        raise DomainError(f"difficulty {d!r} outside [0, 1]")
    return int(np.searchsorted(_LOWER_EDGES, d, side="right")) - 1


def bin_indices(difficulties) -> np.ndarray:
    """Vectorized bin_index over an array of difficulties."""
    d = np.asarray(difficulties, dtype=float)
    if d.size and (np.isnan(d).any() or d.min() < 0.0 or d.max() > 1.0):
        bad = d[np.isnan(d) | (d < 0.0) | (d > 1.0)][0]
        raise DomainError(f"difficulty {bad!r} outside [0, 1]")
    return np.searchsorted(_LOWER_EDGES, d, side="right") - 1


@dataclass(frozen=True)
class DifficultyHistogram:
    """Per-class item counts over the 10 difficulty intervals."""

    label: str
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != NUM_INTERVALS:
            raise DomainError(f"histogram needs {NUM_INTERVALS} counts, got {len(self.counts)}")
        if any(c < 0 for c in self.counts):
            raise DomainError("histogram counts must be nonnegative")

    @property
    def total(self) -> int:
        return sum(self.counts)

    def to_dict(self) -> dict:
        return {"label": self.label, "counts": list(self.counts), "total": self.total}


@dataclass(frozen=True)
class SamplingPlan:
    """Per-interval target counts for one class, summing to the IPC budget."""

    label: str
    targets: tuple[int, ...]
    ipc: int

    def __post_init__(self):
        if len(self.targets) != NUM_INTERVALS:
            raise DomainError(f"plan needs {NUM_INTERVALS} targets, got {len(self.targets)}")
        if any(t < 0 for t in self.targets):
            raise DomainError("plan targets must be nonnegative")
        if sum(self.targets) != self.ipc:
            raise DomainError(f"plan targets sum to {sum(self.targets)}, expected ipc={self.ipc}")

    def to_dict(self) -> dict:
        return {"label": self.label, "targets": list(self.targets), "ipc": self.ipc}


def histogram(difficulties, label: str = "") -> DifficultyHistogram:
    """Count difficulty values per interval for one class."""
    values = list(difficulties)
    counts = [0] * NUM_INTERVALS
    if values:
        for k in bin_indices(values):
            counts[k] += 1
    return DifficultyHistogram(label=label, counts=tuple(counts))


def _hamilton(weights: tuple[int, ...], budget: int) -> tuple[int, ...]:
    """Largest-remainder apportionment of an integer budget over integer weights.

    Exact integer arithmetic: quotas are budget*w/total, floors are integer
    division, and the leftover seats go to the largest remainders
    (budget*w mod total), ties broken by lower index.
    """
    total = sum(weights)
    scaled = [budget * w for w in weights]
    targets = [s // total for s in scaled]
    leftovers = budget - sum(targets)
    if leftovers:
        order = sorted(range(len(weights)), key=lambda k: (-(scaled[k] % total), k))
        for k in order[:leftovers]:
            targets[k] += 1
    return tuple(targets)


def scale_to_ipc(hist: DifficultyHistogram, ipc: int) -> SamplingPlan:
    """Scale a difficulty histogram down (or up) to an IPC-sized plan.

    Targets are the Hamilton apportionment of ipc proportional to the
    histogram counts, so empty intervals stay empty and the targets sum to
    ipc exactly.
    """
    if not isinstance(ipc, int) or isinstance(ipc, bool) or ipc <= 0:
        raise DomainError(f"ipc must be a positive integer, got {ipc!r}")
    if hist.total <= 0:
        raise DegenerateDistribution(f"class {hist.label!r}: all-zero histogram")
    return SamplingPlan(label=hist.label, targets=_hamilton(hist.counts, ipc), ipc=ipc)


def predefined_plan(shape: str, ipc: int, label: str = "",
                    templates: dict[str, tuple[int, ...]] | None = None) -> SamplingPlan:
    """Sampling plan from a named weight template (hill/ground/slope/cliff).

    ``templates`` overrides the default weight tables; each template must
    hold 10 nonnegative weights.
    """
    if not isinstance(ipc, int) or isinstance(ipc, bool) or ipc <= 0:
        raise DomainError(f"ipc must be a positive integer, got {ipc!r}")
    tables = SHAPE_TEMPLATES if templates is None else templates
    if shape not in tables:
        raise DomainError(f"unknown plan shape {shape!r}; expected one of {sorted(tables)}")
    weights = tuple(tables[shape])
    if len(weights) != NUM_INTERVALS or any(w < 0 for w in weights) or sum(weights) == 0:
        raise DomainError(f"template {shape!r} must hold {NUM_INTERVALS} nonnegative weights")
    return SamplingPlan(label=label, targets=_hamilton(weights, ipc), ipc=ipc)


def silverman_bandwidth(values: np.ndarray) -> float:
    """Silverman's rule-of-thumb bandwidth, (4/(3n))^(1/5) * std.

    Data with zero spread (single or constant values) falls back to one
    interval width so the curve stays well defined.
    """
    n = values.size
    sigma = float(values.std(ddof=1)) if n > 1 else 0.0
    if sigma <= 0.0:
        return INTERVAL_WIDTH
    return sigma * (4.0 / (3.0 * n)) ** 0.2


def kde_curve(values, bandwidth=None, grid: int = 256,
              lo: float = 0.0, hi: float = 1.0) -> list[tuple[float, float]]:
    """Gaussian kernel density estimate on an even grid.

    Returns (x, density) pairs; the density is a probability density, i.e.
    integrates to one over the real line. ``bandwidth=None`` selects
    Silverman's rule. The grid spans [lo, hi], by default the difficulty
    range.
    """
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        raise DomainError("kde_curve needs at least one value")
    if bandwidth is None:
        h = silverman_bandwidth(vals)
    else:
        if not isinstance(bandwidth, (int, float)) or bandwidth <= 0:
            raise DomainError(f"bandwidth must be positive, got {bandwidth!r}")
        h = float(bandwidth)
    if grid < 2:
        raise DomainError(f"grid must have at least 2 points, got {grid}")
    xs = np.linspace(lo, hi, grid)
    z = (xs[:, None] - vals[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (vals.size * h * math.sqrt(2.0 * math.pi))
    return list(zip(xs.tolist(), dens.tolist()))
