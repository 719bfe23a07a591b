"""Estimator-style wrappers around smoothing and sampling.

DifficultySmoother follows the fit/transform protocol: fit learns the clip
thresholds and the log-transform base from a set of difficulty values,
transform maps any values through the fitted base (values at or below the
fitted minimum pin to 0, at or above the maximum to 1). On the fit data
transform reproduces the pipeline's output exactly.

DifficultyGuidedSampler treats the original dataset as the thing to fit
(per-class sampling plans) and the pool as the thing to transform (select a
distilled manifest). Both expose get_params/set_params for grid-search
tooling.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_float_vector, check_range
from .distribution import bin_index
from .errors import ValidationError
from .manifest import Manifest, build_manifest
from .sampler import SamplingPolicy, SamplingReport, plan_for_class, sample_class
from .smoothing import VALUE_FLOOR, search_thresholds, smooth_dataset


class DifficultySmoother(TransformerMixin, BaseEstimator):
    """Learn clip thresholds + log base on difficulties, then transform.

    Parameters mirror the pipeline: ``lam`` weighs closeness to the original
    histogram against closeness to uniform; ``grid_max_percent`` bounds the
    threshold search. After ``fit``, ``b_``/``t_`` hold the chosen clip
    counts and ``vmin_``/``vmax_`` the transform base. A degenerate fit
    (fewer than 3 distinct values) sets ``degenerate_`` and makes transform
    the identity.
    """

    def __init__(self, lam: float = 0.5, grid_max_percent: int = 20):
        self.lam = lam
        self.grid_max_percent = grid_max_percent

    def _validate(self, X) -> np.ndarray:
        arr = np.asarray(X, dtype=float)
        if arr.ndim == 2 and arr.shape[1] == 1:
            arr = arr[:, 0]
        arr = as_float_vector(arr, "X")
        return check_range(arr, 0.0, 1.0, "difficulty")

    def fit(self, X, y=None):
        values = self._validate(X)
        grid = range(int(self.grid_max_percent) + 1)
        self.n_features_in_ = 1
        if len(set(values.tolist())) < 3:
            self.degenerate_ = True
            self.b_ = self.t_ = 0
            self.vmin_ = self.vmax_ = None
            self.objective_ = None
            return self
        result = search_thresholds(values, self.lam, grid=grid)
        self.degenerate_ = False
        self.b_ = result.clip.b
        self.t_ = result.clip.t
        self.vmin_ = result.retained_min
        self.vmax_ = result.retained_max
        self.objective_ = result.objective
        self.kl_to_original_ = result.kl_to_original
        self.kl_to_uniform_ = result.kl_to_uniform
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "degenerate_")
        shaped = np.asarray(X, dtype=float)
        values = self._validate(X)
        if self.degenerate_:
            out = values
        else:
            vals = np.maximum(values, VALUE_FLOOR)
            # clip matches the pipeline transform, whose vectorized log can
            # overshoot the endpoints by an ulp
            out = np.clip(np.log(vals / self.vmin_) / math.log(self.vmax_ / self.vmin_), 0.0, 1.0)
            out[values <= self.vmin_] = 0.0
            out[values >= self.vmax_] = 1.0
        return out.reshape(shaped.shape)


class DifficultyGuidedSampler(BaseEstimator):
    """Fit per-class sampling plans on an original manifest, transform a pool.

    ``fit`` smooths the original's difficulties (unless ``apply_smoothing``
    is off) and scales each class histogram to ``ipc`` (or applies a
    predefined shape). ``transform`` smooths the pool the same way, samples
    it against the fitted plans, and returns the distilled manifest; the
    full provenance lands in ``report_``.
    """

    def __init__(self, ipc: int = 10, lam: float = 0.5, shape: str = "scale",
                 strategy: str = "seeded-random", deficit_rule: str = "adjacent-spill",
                 seed: int = 0, apply_smoothing: bool = True, grid_max_percent: int = 20):
        self.ipc = ipc
        self.lam = lam
        self.shape = shape
        self.strategy = strategy
        self.deficit_rule = deficit_rule
        self.seed = seed
        self.apply_smoothing = apply_smoothing
        self.grid_max_percent = grid_max_percent

    def _grid(self):
        return range(int(self.grid_max_percent) + 1)

    def fit(self, X: Manifest, y=None):
        if not isinstance(X, Manifest):
            raise ValidationError("fit expects a Manifest")
        groups = X.by_label()
        if self.apply_smoothing:
            smoothed = smooth_dataset(X, self.lam, grid=self._grid())
            values = {label: smoothed[label].transformed for label in X.labels}
        else:
            values = {label: [i.difficulty for i in groups[label]] for label in X.labels}
        self.labels_ = list(X.labels)
        self.plans_ = {
            label: plan_for_class(values[label], self.ipc, self.shape, label)
            for label in X.labels
        }
        return self

    def transform(self, X: Manifest) -> Manifest:
        check_is_fitted(self, "plans_")
        if not isinstance(X, Manifest):
            raise ValidationError("transform expects a Manifest")
        if X.labels != self.labels_:
            raise ValidationError(f"label sets differ: fitted {self.labels_} vs pool {X.labels}")
        policy = SamplingPolicy(strategy=self.strategy, seed=self.seed,
                                deficit_rule=self.deficit_rule)
        groups = X.by_label()
        if self.apply_smoothing:
            smoothed = smooth_dataset(X, self.lam, grid=self._grid())
            values = {label: smoothed[label].transformed for label in self.labels_}
        else:
            values = {label: [i.difficulty for i in groups[label]] for label in self.labels_}

        distilled = []
        report = SamplingReport()
        for label in self.labels_:
            annotated = [
                item.with_annotations(float(v), bin_index(v))
                for item, v in zip(groups[label], values[label])
            ]
            ids, class_report = sample_class(annotated, self.plans_[label], policy)
            by_id = {item.id: item for item in annotated}
            distilled.extend(by_id[i] for i in ids)
            report.per_class[label] = class_report
        self.report_ = report
        return build_manifest(distilled, role="distilled")

    def fit_transform(self, X: Manifest, y=None, **kwargs) -> Manifest:
        return self.fit(X).transform(X)
