"""Difficulty-guided sampling and difficulty-aware guidance for dataset distillation."""

from .dag import (
    Component,
    GuidanceSpec,
    Mixture,
    NoiseSchedule,
    dag_run,
    forward_diffuse,
    gmm_posterior_mean,
    guide,
    interval_kmeans,
    kmeans,
    make_schedule,
    reverse_sample,
)
from .distribution import (
    NUM_INTERVALS,
    DifficultyHistogram,
    SamplingPlan,
    bin_index,
    bin_indices,
    histogram,
    interval_midpoint,
    kde_curve,
    predefined_plan,
    scale_to_ipc,
)
from .errors import (
    DeficitError,
    DegenerateDistribution,
    DgsError,
    DomainError,
    InsufficientSupply,
    IoError,
    ValidationError,
)
from .estimators import DifficultyGuidedSampler, DifficultySmoother
from .manifest import (
    Item,
    Manifest,
    build_manifest,
    difficulty,
    load_manifest,
    make_item,
    write_manifest,
)
from .metrics import (
    VectorSet,
    bias_report,
    cosine,
    diversity,
    metrics_report,
    representativeness,
    vectors_from_manifest,
)
from .rng import substream
from .sampler import SamplingPolicy, SamplingReport, dgs_run, plan_for_class, sample_class
from .smoothing import (
    ClipSpec,
    SmoothingResult,
    clip,
    kl_divergence,
    log_transform,
    search_thresholds,
    smooth_dataset,
    smoothing_objective,
)

__version__ = "0.1.0"

__all__ = [
    "Component",
    "GuidanceSpec",
    "Mixture",
    "NoiseSchedule",
    "dag_run",
    "forward_diffuse",
    "gmm_posterior_mean",
    "guide",
    "interval_kmeans",
    "kmeans",
    "make_schedule",
    "reverse_sample",
    "NUM_INTERVALS",
    "DifficultyHistogram",
    "SamplingPlan",
    "bin_index",
    "bin_indices",
    "histogram",
    "interval_midpoint",
    "kde_curve",
    "predefined_plan",
    "scale_to_ipc",
    "DeficitError",
    "DegenerateDistribution",
    "DgsError",
    "DomainError",
    "InsufficientSupply",
    "IoError",
    "ValidationError",
    "DifficultyGuidedSampler",
    "DifficultySmoother",
    "Item",
    "Manifest",
    "build_manifest",
    "difficulty",
    "load_manifest",
    "make_item",
    "write_manifest",
    "VectorSet",
    "bias_report",
    "cosine",
    "diversity",
    "metrics_report",
    "representativeness",
    "vectors_from_manifest",
    "substream",
    "SamplingPolicy",
    "SamplingReport",
    "dgs_run",
    "plan_for_class",
    "sample_class",
    "ClipSpec",
    "SmoothingResult",
    "clip",
    "kl_divergence",
    "log_transform",
    "search_thresholds",
    "smooth_dataset",
    "smoothing_objective",
    "__version__",
]
