"""Dataset-quality metrics over latent vectors, plus a pool-bias diagnostic.

Representativeness asks: for each generated vector, how similar is it to the
real item it resembles least? Low values flag outliers nothing in the real
set accounts for. Diversity asks: for each generated vector, how similar is
it to its closest sibling? High values flag near-duplicates. Both use cosine
similarity, reported per item together with the worst-case aggregate (min
for representativeness, max for diversity).

The bias report compares a candidate pool's difficulty distribution against
the original dataset's, per class. Generative pools tend to oversample easy
items, which shows up as a negative mean-difficulty gap and an
easiest-interval share ratio above one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_float_matrix
from .distribution import histogram
from .errors import DomainError, ValidationError
from .manifest import Manifest

_NORM_EPS = 0.0  # zero norms are rejected outright, not smoothed


@dataclass(frozen=True)
class VectorSet:
    """Aligned (id, vector) pairs of uniform dimension, all nonzero."""

    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        vecs = as_float_matrix(self.vectors, "vectors")
        if len(self.ids) != vecs.shape[0]:
            raise DomainError(
                f"ids ({len(self.ids)}) and vectors ({vecs.shape[0]}) must align"
            )
        norms = np.linalg.norm(vecs, axis=1)
        if (norms <= _NORM_EPS).any():
            bad = [self.ids[i] for i in np.nonzero(norms <= _NORM_EPS)[0]]
            raise DomainError(f"zero-norm vectors not admitted: {bad}")
        object.__setattr__(self, "vectors", vecs)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def unit_vectors(self) -> np.ndarray:
        return self.vectors / np.linalg.norm(self.vectors, axis=1, keepdims=True)


def vectors_from_manifest(manifest: Manifest) -> VectorSet:
    """Latent vectors of a manifest as a VectorSet; requires latents on all items."""
    if manifest.latent_dim == 0:
        raise ValidationError("manifest carries no latent vectors")
    return VectorSet(
        ids=tuple(item.id for item in manifest.items),
        vectors=np.array([item.latent for item in manifest.items], dtype=float),
    )


def cosine(u, v) -> float:
    """Cosine similarity of two nonzero vectors of equal dimension."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise DomainError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DomainError("cosine undefined for zero vectors")
    value = float(np.dot(u, v) / (nu * nv))
    # rounding can push |value| a hair past 1
    return max(-1.0, min(1.0, value))


def representativeness(generated: VectorSet, real_memory: VectorSet) -> tuple[list[float], float]:
    """Per-item worst-case similarity to the real memory, plus the overall min.

    For each generated vector g the score is min over real m of cosine(g, m);
    the aggregate is the minimum over generated items.
    """
    if generated.dim != real_memory.dim:
        raise DomainError(
            f"dimension mismatch: generated {generated.dim} vs memory {real_memory.dim}"
        )
    sims = generated.unit_vectors() @ real_memory.unit_vectors().T
    sims = np.clip(sims, -1.0, 1.0)
    per_item = sims.min(axis=1)
    return per_item.tolist(), float(per_item.min())


def diversity(generated: VectorSet) -> tuple[list[float], float]:
    """Per-item highest similarity to any other member, plus the overall max.

    Lower values mean a more diverse set. Needs at least two vectors.
    """
    if len(generated) < 2:
        raise DomainError("diversity needs at least 2 vectors")
    sims = generated.unit_vectors() @ generated.unit_vectors().T
    sims = np.clip(sims, -1.0, 1.0)
    np.fill_diagonal(sims, -np.inf)
    per_item = sims.max(axis=1)
    return per_item.tolist(), float(per_item.max())


def bias_report(original: Manifest, pool: Manifest) -> dict:
    """Per-class difficulty-distribution gap between a pool and the original.

    For every class: normalized pool histogram minus normalized original
    histogram, the mean-difficulty gap (pool minus original), and the ratio
    of easiest-interval shares (None when the original's easiest share is
    zero). Negative gaps and ratios above one indicate an easy-biased pool.
    """
    if original.labels != pool.labels:
        raise ValidationError(
            f"label sets differ: original {original.labels} vs pool {pool.labels}"
        )
    report: dict = {"classes": {}}
    orig_groups = original.by_label()
    pool_groups = pool.by_label()
    for label in original.labels:
        o_vals = np.array([item.difficulty for item in orig_groups[label]])
        p_vals = np.array([item.difficulty for item in pool_groups[label]])
        o_hist = np.array(histogram(o_vals, label).counts, dtype=float)
        p_hist = np.array(histogram(p_vals, label).counts, dtype=float)
        o_share = o_hist / o_hist.sum()
        p_share = p_hist / p_hist.sum()
        ratio = None if o_share[0] == 0 else float(p_share[0] / o_share[0])
        report["classes"][label] = {
            "interval_delta": (p_share - o_share).tolist(),
            "mean_difficulty_gap": float(p_vals.mean() - o_vals.mean()),
            "easiest_share_ratio": ratio,
        }
    gaps = [c["mean_difficulty_gap"] for c in report["classes"].values()]
    report["mean_difficulty_gap"] = float(np.mean(gaps))
    return report


def metrics_report(original: Manifest, generated: Manifest) -> dict:
    """Full metrics bundle: representativeness, diversity, and bias."""
    gen_vecs = vectors_from_manifest(generated)
    real_vecs = vectors_from_manifest(original)
    rep_items, rep_agg = representativeness(gen_vecs, real_vecs)
    div_items, div_agg = diversity(gen_vecs)
    return {
        "representativeness": {
            "per_item": [{"id": i, "value": v} for i, v in zip(gen_vecs.ids, rep_items)],
            "aggregate": rep_agg,
        },
        "diversity": {
            "per_item": [{"id": i, "value": v} for i, v in zip(gen_vecs.ids, div_items)],
            "aggregate": div_agg,
        },
        "bias": bias_report(original, generated),
    }
