"""Difficulty-guided sampling: distribution-matched selection from a pool.

The run smooths per-class difficulties of both the original dataset and the
candidate pool, derives a per-class sampling plan (the original's smoothed
histogram scaled to the item budget, or a predefined shape), then fills each
difficulty interval from the pool's matching interval. When an interval
cannot supply its target the deficit is redistributed according to the
policy: spill to the nearest interval with leftover items, fill uniformly at
random from all leftovers, or fail loudly.

Every random draw goes through a per-(class, interval) substream of the
portable RNG, so results are identical no matter how classes are ordered or
parallelized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ._validation import check_choice
from .distribution import (
    PLAN_SHAPES,
    SamplingPlan,
    bin_index,
    histogram,
    interval_midpoint,
    predefined_plan,
    scale_to_ipc,
)
from .errors import DeficitError, DomainError, InsufficientSupply, ValidationError
from .manifest import Item, Manifest, build_manifest
from .rng import substream
from .smoothing import smooth_dataset

STRATEGIES = ("seeded-random", "center-nearest")
DEFICIT_RULES = ("adjacent-spill", "random-fill", "fail")


@dataclass(frozen=True)
class SamplingPolicy:
    """How items are picked within an interval and how deficits are handled."""

    strategy: str = "seeded-random"
    seed: int = 0
    deficit_rule: str = "adjacent-spill"

    def __post_init__(self):
        check_choice(self.strategy, STRATEGIES, "strategy")
        check_choice(self.deficit_rule, DEFICIT_RULES, "deficit_rule")
        if self.strategy == "seeded-random" or self.deficit_rule == "random-fill":
            if not isinstance(self.seed, int) or isinstance(self.seed, bool):
                raise DomainError(f"seed must be an integer, got {self.seed!r}")


@dataclass
class ClassReport:
    """Per-class provenance of one sampling run."""

    label: str
    targets: tuple[int, ...]
    supply: tuple[int, ...]
    achieved: list[int]
    deficit: tuple[int, ...]
    spill: dict[str, int] = field(default_factory=dict)
    filled_random: int = 0
    selected_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "targets": list(self.targets),
            "supply": list(self.supply),
            "achieved": list(self.achieved),
            "deficit": list(self.deficit),
            "spill": dict(self.spill),
            "filled_random": self.filled_random,
            "selected_ids": list(self.selected_ids),
        }


@dataclass
class SamplingReport:
    """Provenance for a whole run, one entry per class."""

    per_class: dict[str, ClassReport] = field(default_factory=dict)

    @property
    def total_deficit(self) -> int:
        return sum(sum(rep.deficit) for rep in self.per_class.values())

    @property
    def total_spilled(self) -> int:
        return sum(sum(rep.spill.values()) for rep in self.per_class.values())

    def to_dict(self) -> dict:
        return {
            "classes": {label: rep.to_dict() for label, rep in sorted(self.per_class.items())},
            "total_deficit": self.total_deficit,
            "total_spilled": self.total_spilled,
        }


def _smoothed_value(item: Item) -> float:
    return item.difficulty if item.difficulty_smoothed is None else item.difficulty_smoothed


def _pick(items: list[Item], count: int, strategy: str, rng, interval: int) -> list[Item]:
    """Select `count` items from one interval's candidates, removing them."""
    if count <= 0:
        return []
    if strategy == "seeded-random":
        idx = sorted(rng.choice(len(items), size=count, replace=False).tolist())
    else:
        mid = interval_midpoint(interval)
        ranked = sorted(range(len(items)),
                        key=lambda i: (abs(_smoothed_value(items[i]) - mid), items[i].id))
        idx = sorted(ranked[:count])
    chosen = [items[i] for i in idx]
    for i in reversed(idx):
        del items[i]
    return chosen


def sample_class(items, plan: SamplingPlan, policy: SamplingPolicy) -> tuple[list[str], ClassReport]:
    """Sample one class from its pool items following the plan.

    Items are binned by smoothed difficulty (raw difficulty when no smoothed
    value is present). Each interval contributes min(target, supply) items;
    deficits are then redistributed per the policy's deficit rule. The
    returned ids are in deterministic selection order.
    """
    items = list(items)
    if not items:
        raise InsufficientSupply("empty pool class")
    labels = {item.label for item in items}
    if len(labels) != 1:
        raise ValidationError(f"sample_class expects a single class, got {sorted(labels)}")
    label = labels.pop()
    if plan.label and plan.label != label:
        raise ValidationError(f"plan is for class {plan.label!r}, items are {label!r}")
    if len(items) < plan.ipc:
        raise InsufficientSupply(
            f"class {label!r}: pool has {len(items)} items, plan needs {plan.ipc}"
        )

    bins: dict[int, list[Item]] = {k: [] for k in range(len(plan.targets))}
    for item in items:
        bins[bin_index(_smoothed_value(item))].append(item)
    supply = tuple(len(bins[k]) for k in range(len(plan.targets)))

    selected: list[Item] = []
    achieved = [0] * len(plan.targets)
    for k, target in enumerate(plan.targets):
        take = min(target, supply[k])
        rng = substream(policy.seed, "sample", label, k)
        for item in _pick(bins[k], take, policy.strategy, rng, k):
            selected.append(item)
            achieved[k] += 1

    deficit = tuple(max(0, t - s) for t, s in zip(plan.targets, supply))
    report = ClassReport(label=label, targets=plan.targets, supply=supply,
                         achieved=achieved, deficit=deficit)

    if any(deficit):
        if policy.deficit_rule == "fail":
            detail = {k: d for k, d in enumerate(deficit) if d}
            raise DeficitError(f"class {label!r}: unmet interval demand {detail}")
        if policy.deficit_rule == "adjacent-spill":
            _spill(bins, deficit, policy, label, selected, achieved, report)
        else:
            _random_fill(bins, sum(deficit), policy, label, selected, achieved, report)

    report.selected_ids = [item.id for item in selected]
    return report.selected_ids, report


def _spill(bins, deficit, policy, label, selected, achieved, report) -> None:
    """Move unmet demand to the nearest intervals that still hold items."""
    num = len(deficit)
    for k in range(num):
        need = deficit[k]
        while need > 0:
            candidates = [k2 for k2 in range(num) if k2 != k and bins[k2]]
            if not candidates:
                break
            dest = min(candidates, key=lambda k2: (abs(k2 - k), k2))
            take = min(need, len(bins[dest]))
            rng = substream(policy.seed, "spill", label, k, dest)
            for item in _pick(bins[dest], take, policy.strategy, rng, dest):
                selected.append(item)
                achieved[dest] += 1
            report.spill[f"{k}->{dest}"] = report.spill.get(f"{k}->{dest}", 0) + take
            need -= take


def _random_fill(bins, total_deficit, policy, label, selected, achieved, report) -> None:
    """Fill the whole deficit uniformly from all unselected items."""
    leftovers = [item for k in sorted(bins) for item in bins[k]]
    take = min(total_deficit, len(leftovers))
    if take > 0:
        rng = substream(policy.seed, "fill", label)
        idx = sorted(rng.choice(len(leftovers), size=take, replace=False).tolist())
        for i in idx:
            item = leftovers[i]
            selected.append(item)
            achieved[bin_index(_smoothed_value(item))] += 1
        report.filled_random = take


def plan_for_class(values, ipc: int, shape: str, label: str = "") -> SamplingPlan:
    """Sampling plan for one class from its (smoothed) difficulty values."""
    check_choice(shape, PLAN_SHAPES, "shape")
    if shape == "scale":
        return scale_to_ipc(histogram(values, label), ipc)
    return predefined_plan(shape, ipc, label)


def dgs_run(original: Manifest, pool: Manifest, ipc: int, lam: float = 0.5,
            shape: str = "scale", policy: SamplingPolicy | None = None,
            apply_smoothing: bool = True, grid=None) -> tuple[Manifest, SamplingReport]:
    """Difficulty-guided sampling end to end.

    Smooths original and pool difficulties per class (unless
    ``apply_smoothing`` is off), derives each class's plan from the smoothed
    original histogram (or a predefined shape), samples the pool, and
    assembles the distilled manifest. Selected items keep their pool
    metadata plus ``difficulty_smoothed`` and ``interval`` annotations.
    """
    policy = policy or SamplingPolicy()
    if original.labels != pool.labels:
        raise ValidationError(
            f"label sets differ: original {original.labels} vs pool {pool.labels}"
        )
    pool_groups = pool.by_label()
    for label in pool.labels:
        if len(pool_groups[label]) < ipc:
            raise InsufficientSupply(
                f"class {label!r}: pool has {len(pool_groups[label])} items, need ipc={ipc}"
            )

    if apply_smoothing:
        orig_smooth = smooth_dataset(original, lam, grid=grid)
        pool_smooth = smooth_dataset(pool, lam, grid=grid)
    else:
        orig_smooth = pool_smooth = None

    orig_groups = original.by_label()
    distilled: list[Item] = []
    report = SamplingReport()
    for label in original.labels:
        if orig_smooth is not None:
            orig_values = orig_smooth[label].transformed
            pool_values = pool_smooth[label].transformed
        else:
            orig_values = [item.difficulty for item in orig_groups[label]]
            pool_values = [item.difficulty for item in pool_groups[label]]

        plan = plan_for_class(orig_values, ipc, shape, label)
        annotated = [
            item.with_annotations(float(v), bin_index(v))
            for item, v in zip(pool_groups[label], pool_values)
        ]
        ids, class_report = sample_class(annotated, plan, policy)
        by_id = {item.id: item for item in annotated}
        distilled.extend(by_id[i] for i in ids)
        report.per_class[label] = class_report

    return build_manifest(distilled, role="distilled"), report
