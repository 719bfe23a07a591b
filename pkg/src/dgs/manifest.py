"""Difficulty-annotated dataset manifests.

A manifest is a UTF-8 JSONL file, one record per item. Each record carries
``id``, ``label`` and exactly one of ``prob_true`` / ``difficulty``; optional
fields are ``latent`` (fixed-dimension array), ``path``, and the two fields a
distillation run adds, ``difficulty_smoothed`` and ``interval``. Any other
field is rejected.

Difficulty is defined as one minus the classifier's probability on the true
class. On load both views are materialized; on write the field the record
originally carried is emitted, so load(write(m)) reproduces m bit for bit
(floats are serialized as shortest round-trip decimals).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .errors import DomainError, IoError, ValidationError

ROLES = ("original", "pool", "distilled")

_REQUIRED_FIELDS = {"id", "label"}
_VALUE_FIELDS = {"prob_true", "difficulty"}
_OPTIONAL_FIELDS = {"latent", "path", "difficulty_smoothed", "interval"}
_ALL_FIELDS = _REQUIRED_FIELDS | _VALUE_FIELDS | _OPTIONAL_FIELDS


def difficulty(prob_true: float) -> float:
    """Difficulty of an item given the true-class probability.

    Defined as ``1 - prob_true``: a perfectly confident correct prediction
    has difficulty 0, an item the classifier assigns zero probability to
    its true class has difficulty 1.
    """
    if not isinstance(prob_true, (int, float)) or isinstance(prob_true, bool):
        raise DomainError(f"prob_true must be a number, got {prob_true!r}")
    if math.isnan(prob_true) or not 0.0 <= prob_true <= 1.0:
        raise DomainError(f"prob_true must lie in [0, 1], got {prob_true!r}")
    return 1.0 - prob_true


@dataclass(frozen=True)
class Item:
    """One dataset element with normalized difficulty annotations."""

    id: str
    label: str
    prob_true: float
    difficulty: float
    latent: tuple[float, ...] | None = None
    path: str | None = None
    difficulty_smoothed: float | None = None
    interval: int | None = None
    # which of prob_true/difficulty the source record carried; preserved so
    # write -> load round-trips exactly
    source_field: str = "prob_true"

    def to_record(self) -> dict:
        rec: dict = {"id": self.id, "label": self.label}
        if self.source_field == "difficulty":
            rec["difficulty"] = self.difficulty
        else:
            rec["prob_true"] = self.prob_true
        if self.latent is not None:
            rec["latent"] = list(self.latent)
        if self.path is not None:
            rec["path"] = self.path
        if self.difficulty_smoothed is not None:
            rec["difficulty_smoothed"] = self.difficulty_smoothed
        if self.interval is not None:
            rec["interval"] = self.interval
        return rec

    def with_annotations(self, difficulty_smoothed: float, interval: int) -> "Item":
        return replace(self, difficulty_smoothed=difficulty_smoothed, interval=interval)


def make_item(id: str, label: str, *, prob_true: float | None = None,
              difficulty: float | None = None, latent=None, path: str | None = None,
              difficulty_smoothed: float | None = None, interval: int | None = None) -> Item:
    """Build an Item from either value field; the other is derived.

    Exactly one of prob_true / difficulty must be given. The given one
    becomes the field emitted on write.
    """
    if (prob_true is None) == (difficulty is None):
        raise DomainError("exactly one of prob_true/difficulty must be given")
    if prob_true is not None:
        source = "prob_true"
        value = prob_true
    else:
        source = "difficulty"
        value = difficulty
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise DomainError(f"{source} must be a number, got {value!r}")
    if math.isnan(value) or not 0.0 <= value <= 1.0:
        raise DomainError(f"{source} must lie in [0, 1], got {value!r}")
    value = float(value)
    return Item(
        id=id,
        label=label,
        prob_true=value if source == "prob_true" else 1.0 - value,
        difficulty=1.0 - value if source == "prob_true" else value,
        latent=None if latent is None else tuple(float(v) for v in latent),
        path=path,
        difficulty_smoothed=difficulty_smoothed,
        interval=interval,
        source_field=source,
    )


@dataclass(frozen=True)
class Manifest:
    """Ordered, validated collection of items. Immutable after construction."""

    items: tuple[Item, ...]
    role: str = "original"
    latent_dim: int = 0

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValidationError(f"unknown manifest role {self.role!r}")
        if not self.items:
            raise ValidationError("manifest must contain at least one item")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def labels(self) -> list[str]:
        """Distinct class labels in sorted order."""
        return sorted({item.label for item in self.items})

    def by_label(self) -> dict[str, list[Item]]:
        """Items grouped per class, input order preserved within a class."""
        groups: dict[str, list[Item]] = {}
        for item in self.items:
            groups.setdefault(item.label, []).append(item)
        return groups


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _parse_record(obj, where: str) -> Item:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: record is not a JSON object")
    unknown = set(obj) - _ALL_FIELDS
    if unknown:
        raise ValidationError(f"{where}: unknown fields {sorted(unknown)}")
    for name in ("id", "label"):
        if name not in obj:
            raise ValidationError(f"{where}: missing required field {name!r}")
        if not isinstance(obj[name], str) or not obj[name]:
            raise ValidationError(f"{where}: field {name!r} must be a non-empty string")

    present = _VALUE_FIELDS & set(obj)
    if len(present) != 1:
        raise ValidationError(
            f"{where}: exactly one of 'prob_true'/'difficulty' required, got {sorted(present) or 'neither'}"
        )
    source = present.pop()
    value = obj[source]
    if not _is_number(value) or math.isnan(value) or not 0.0 <= value <= 1.0:
        raise ValidationError(f"{where}: {source} must be a number in [0, 1], got {value!r}")
    value = float(value)
    if source == "prob_true":
        prob_true, diff = value, 1.0 - value
    else:
        prob_true, diff = 1.0 - value, value

    latent = None
    if "latent" in obj:
        raw = obj["latent"]
        if not isinstance(raw, list) or not raw or not all(_is_number(v) for v in raw):
            raise ValidationError(f"{where}: latent must be a non-empty array of numbers")
        latent = tuple(float(v) for v in raw)

    path = obj.get("path")
    if path is not None and not isinstance(path, str):
        raise ValidationError(f"{where}: path must be a string")

    smoothed = obj.get("difficulty_smoothed")
    if smoothed is not None:
        if not _is_number(smoothed) or not 0.0 <= smoothed <= 1.0:
            raise ValidationError(f"{where}: difficulty_smoothed must be a number in [0, 1]")
        smoothed = float(smoothed)

    interval = obj.get("interval")
    if interval is not None:
        if not isinstance(interval, int) or isinstance(interval, bool) or not 0 <= interval <= 9:
            raise ValidationError(f"{where}: interval must be an integer in 0..9")

    return Item(
        id=obj["id"],
        label=obj["label"],
        prob_true=prob_true,
        difficulty=diff,
        latent=latent,
        path=path,
        difficulty_smoothed=smoothed,
        interval=interval,
        source_field=source,
    )


def build_manifest(items, role: str = "original") -> Manifest:
    """Assemble and validate a Manifest from parsed items."""
    items = tuple(items)
    if not items:
        raise ValidationError("manifest must contain at least one item")
    seen: set[str] = set()
    for item in items:
        if item.id in seen:
            raise ValidationError(f"duplicate id {item.id!r}")
        seen.add(item.id)
    dims = {len(item.latent) for item in items if item.latent is not None}
    if len(dims) > 1:
        raise ValidationError(f"inconsistent latent dimensions {sorted(dims)}")
    if dims and any(item.latent is None for item in items):
        raise ValidationError("either all items carry a latent vector or none do")
    latent_dim = dims.pop() if dims else 0
    return Manifest(items=items, role=role, latent_dim=latent_dim)


def load_manifest(path, role: str = "original") -> Manifest:
    """Parse and validate a JSONL manifest file.

    Raises ValidationError on the first contract violation, IoError if the
    file cannot be read. Input order is preserved.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc

    items = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"line {lineno}: invalid JSON: {exc}") from exc
        items.append(_parse_record(obj, f"line {lineno}"))
    if not items:
        raise ValidationError(f"manifest {path} is empty")
    return build_manifest(items, role=role)


def write_manifest(manifest: Manifest, path) -> None:
    """Write a manifest as JSONL; load(write(m)) equals m field for field."""
    if not isinstance(manifest, Manifest):
        raise ValidationError("write_manifest expects a Manifest")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for item in manifest.items:
                fh.write(json.dumps(item.to_record()) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write manifest {path}: {exc}") from exc


def collect_errors(path) -> list[str]:
    """Scan a manifest file and return every contract violation found.

    Unlike load_manifest this does not stop at the first problem; it is the
    backing for the `validate` CLI command.
    """
    errors: list[str] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        return [f"cannot read manifest {path}: {exc}"]

    items = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(f"line {lineno}: invalid JSON: {exc}")
            continue
        try:
            item = _parse_record(obj, f"line {lineno}")
        except ValidationError as exc:
            errors.append(str(exc))
            continue
        if item.id in seen_ids:
            errors.append(f"line {lineno}: duplicate id {item.id!r}")
            continue
        seen_ids.add(item.id)
        items.append(item)

    if not items and not errors:
        errors.append(f"manifest {path} is empty")
    if items:
        dims = {len(item.latent) for item in items if item.latent is not None}
        if len(dims) > 1:
            errors.append(f"inconsistent latent dimensions {sorted(dims)}")
        elif dims and any(item.latent is None for item in items):
            errors.append("either all items carry a latent vector or none do")
    return errors
