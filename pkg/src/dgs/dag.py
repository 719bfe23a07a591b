"""Difficulty-aware guidance over a desk-scale reverse-diffusion simulator.

The simulator replaces a trained diffusion model with an analytic denoiser:
when clean vectors are drawn from a known Gaussian mixture and noised by the
standard forward process, the expected clean vector given a noisy one has a
closed form (responsibility-weighted per-component posterior means). That
makes the guidance math testable end to end with provable oracles.

Guidance follows the distillation recipe: per difficulty interval, cluster
the original latents into as many centers as the sampling plan assigns to
that interval, then steer one reverse trajectory toward each center by
nudging the predicted clean vector toward it, scaled by the step's noise
level. Guidance is active for steps t >= t_stop, with t counting down from
T; t_stop = T + 1 disables it entirely.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_float_matrix, as_float_vector, check_choice
from .distribution import SamplingPlan, bin_index, histogram, interval_midpoint, scale_to_ipc
from .errors import (
    DegenerateDistribution,
    DomainError,
    InsufficientSupply,
    ValidationError,
)
from .manifest import Manifest, build_manifest, make_item
from .rng import substream

DEFAULT_STEPS = 50
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02
DEFAULT_T_STOP = 25
SIGMA_MODES = ("posterior", "residual")
GUIDE_TARGETS = ("denoised", "noisy")


@dataclass(frozen=True)
class NoiseSchedule:
    """Forward-process constants for T steps of linear-beta diffusion.

    Arrays are stored 0-indexed; use the ``*_at(t)`` accessors with the
    conventional 1-based step index. ``sigma`` holds the reverse-step
    posterior standard deviations (sigma_1 = 0: the last step is exact).
    """

    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.T < 1 or len(self.beta) != self.T:
            raise DomainError(f"schedule needs T >= 1 beta values, got T={self.T}")
        ab = np.asarray(self.alpha_bar)
        if not ((ab > 0) & (ab <= 1)).all():
            raise DomainError("alpha_bar must lie in (0, 1]")
        if self.T > 1 and not (np.diff(ab) < 0).all():
            raise DomainError("alpha_bar must be strictly decreasing")
        if (np.asarray(self.sigma) < 0).any() or not np.isfinite(self.sigma).all():
            raise DomainError("sigma must be nonnegative and finite")

    def _check_t(self, t: int) -> int:
        if not isinstance(t, (int, np.integer)) or isinstance(t, bool) or not 1 <= t <= self.T:
            raise DomainError(f"step t must be an integer in 1..{self.T}, got {t!r}")
        return int(t)

    def beta_at(self, t: int) -> float:
        return float(self.beta[self._check_t(t) - 1])

    def alpha_bar_at(self, t: int) -> float:
        return float(self.alpha_bar[self._check_t(t) - 1])

    def alpha_bar_before(self, t: int) -> float:
        """alpha_bar at step t-1, with the t=1 convention alpha_bar_0 = 1."""
        t = self._check_t(t)
        return 1.0 if t == 1 else float(self.alpha_bar[t - 2])

    def sigma_at(self, t: int) -> float:
        return float(self.sigma[self._check_t(t) - 1])

    def residual_sigma_at(self, t: int) -> float:
        """The sqrt(1 - alpha_bar_t) alternative noise scale."""
        return math.sqrt(1.0 - self.alpha_bar_at(t))


def make_schedule(T: int = DEFAULT_STEPS, beta_start: float = DEFAULT_BETA_START,
                  beta_end: float = DEFAULT_BETA_END) -> NoiseSchedule:
    """Linear-beta schedule with DDPM posterior standard deviations."""
    if not isinstance(T, int) or isinstance(T, bool) or T < 1:
        raise DomainError(f"T must be a positive integer, got {T!r}")
    if not 0 < beta_start <= beta_end < 1:
        raise DomainError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    beta = np.linspace(beta_start, beta_end, T)
    alpha_bar = np.cumprod(1.0 - beta)
    prev = np.concatenate(([1.0], alpha_bar[:-1]))
    var = (1.0 - prev) / (1.0 - alpha_bar) * beta
    return NoiseSchedule(T=T, beta=beta, alpha_bar=alpha_bar, sigma=np.sqrt(var))


@dataclass(frozen=True)
class Component:
    """One isotropic Gaussian mixture component; std 0 is a point mass."""

    weight: float
    mean: tuple[float, ...]
    std: float

    def __post_init__(self):
        if not self.weight > 0:
            raise DomainError(f"component weight must be positive, got {self.weight!r}")
        if self.std < 0:
            raise DomainError(f"component std must be >= 0, got {self.std!r}")


@dataclass(frozen=True)
class Mixture:
    """Finite isotropic Gaussian mixture in d dimensions."""

    components: tuple[Component, ...]
    dim: int

    def __post_init__(self):
        if not self.components:
            raise DomainError("mixture needs at least one component")
        if self.dim < 1:
            raise DomainError(f"mixture dimension must be >= 1, got {self.dim}")
        for comp in self.components:
            if len(comp.mean) != self.dim:
                raise DomainError(
                    f"component mean has dimension {len(comp.mean)}, mixture is {self.dim}"
                )
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"component weights must sum to 1, got {total}")

    @classmethod
    def from_config(cls, config: dict) -> "Mixture":
        """Build from the JSON shape {"dim": d, "components": [{"weight","mean","std"}]}."""
        if not isinstance(config, dict) or "dim" not in config or "components" not in config:
            raise ValidationError("mixture config needs 'dim' and 'components'")
        comps = []
        for raw in config["components"]:
            try:
                comps.append(Component(weight=float(raw["weight"]),
                                       mean=tuple(float(x) for x in raw["mean"]),
                                       std=float(raw["std"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"bad mixture component {raw!r}: {exc}") from exc
        return cls(components=tuple(comps), dim=int(config["dim"]))

    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    def stds(self) -> np.ndarray:
        return np.array([c.std for c in self.components])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n clean vectors from the mixture."""
        comp_idx = rng.choice(len(self.components), size=n, p=self.weights())
        out = self.means()[comp_idx]
        noise = rng.standard_normal((n, self.dim))
        return out + self.stds()[comp_idx, None] * noise


@dataclass(frozen=True)
class GuidanceSpec:
    """Target center, strength, and stop step for difficulty-aware guidance."""

    center: tuple[float, ...]
    lambda_gui: float
    t_stop: int

    def __post_init__(self):
        if not self.lambda_gui >= 0:
            raise DomainError(f"lambda_gui must be nonnegative, got {self.lambda_gui!r}")
        if not isinstance(self.t_stop, int) or isinstance(self.t_stop, bool):
            raise DomainError(f"t_stop must be an integer, got {self.t_stop!r}")

    def validate_for(self, T: int) -> None:
        if not 0 <= self.t_stop <= T + 1:
            raise DomainError(f"t_stop must lie in 0..{T + 1}, got {self.t_stop}")

    def active(self, t: int) -> bool:
        return t >= self.t_stop


def forward_diffuse(z0, t: int, schedule: NoiseSchedule, noise) -> np.ndarray:
    """One-shot forward noising: sqrt(ab_t) z0 + sqrt(1 - ab_t) noise."""
    z0 = as_float_vector(z0, "z0")
    noise = as_float_vector(noise, "noise")
    if z0.shape != noise.shape:
        raise DomainError(f"dimension mismatch: z0 {z0.shape} vs noise {noise.shape}")
    ab = schedule.alpha_bar_at(t)
    return math.sqrt(ab) * z0 + math.sqrt(1.0 - ab) * noise


def guide(z, spec: GuidanceSpec, sigma_t: float) -> np.ndarray:
    """Nudge z toward the guidance center: z + lambda_gui (z_c - z) sigma_t."""
    z = as_float_vector(z, "z")
    center = as_float_vector(spec.center, "center")
    if z.shape != center.shape:
        raise DomainError(f"dimension mismatch: z {z.shape} vs center {center.shape}")
    if sigma_t < 0:
        raise DomainError(f"sigma_t must be nonnegative, got {sigma_t!r}")
    return z + spec.lambda_gui * (center - z) * sigma_t


def gmm_posterior_mean(z_t, t: int, mixture: Mixture, schedule: NoiseSchedule) -> np.ndarray:
    """Expected clean vector given a noisy one, in closed form.

    With z0 ~ mixture and z_t from the forward process, z_t given component
    i is Gaussian with mean sqrt(ab) mu_i and per-axis variance
    ab s_i^2 + (1 - ab). Component responsibilities come from those
    densities (log-sum-exp normalized); each component's posterior mean is
    (sqrt(ab) s_i^2 z_t + (1 - ab) mu_i) / (ab s_i^2 + 1 - ab).
    """
    z = as_float_vector(z_t, "z_t")
    if z.shape[0] != mixture.dim:
        raise DomainError(f"z_t has dimension {z.shape[0]}, mixture is {mixture.dim}")
    ab = schedule.alpha_bar_at(t)
    w = mixture.weights()
    mu = mixture.means()
    s2 = mixture.stds() ** 2
    var = ab * s2 + (1.0 - ab)
    if (var <= 0).any():
        raise DegenerateDistribution("no noise at this step and a point-mass component")
    d = mixture.dim
    sq = ((z[None, :] - math.sqrt(ab) * mu) ** 2).sum(axis=1)
    log_resp = np.log(w) - 0.5 * (d * np.log(2.0 * math.pi * var) + sq / var)
    log_resp -= log_resp.max()
    resp = np.exp(log_resp)
    resp /= resp.sum()
    post_means = (math.sqrt(ab) * s2[:, None] * z[None, :] + (1.0 - ab) * mu) / var[:, None]
    return resp @ post_means


def reverse_sample(schedule: NoiseSchedule, mixture: Mixture,
                   guidance: GuidanceSpec | None = None, seed: int = 0,
                   keys: tuple = (), sigma_mode: str = "posterior",
                   guide_target: str = "denoised") -> tuple[np.ndarray, np.ndarray]:
    """Ancestral reverse sampling from t = T down to 1.

    Each step predicts the clean vector with the analytic denoiser, applies
    guidance while active (to the predicted clean vector by default, or to
    the noisy one with ``guide_target="noisy"``), then takes the standard
    posterior step. Noise is drawn every step so guided and unguided runs
    with the same seed consume identical randomness; sigma_1 = 0 makes the
    final step exact. Returns (trajectory of T+1 rows from z_T to z_0,
    final z_0).

    ``sigma_mode`` selects the noise scale used inside the guidance term:
    the reverse-step posterior sigma, or sqrt(1 - alpha_bar_t).
    """
    check_choice(sigma_mode, SIGMA_MODES, "sigma_mode")
    check_choice(guide_target, GUIDE_TARGETS, "guide_target")
    if guidance is not None:
        guidance.validate_for(schedule.T)
        if len(guidance.center) != mixture.dim:
            raise DomainError(
                f"guidance center has dimension {len(guidance.center)}, mixture is {mixture.dim}"
            )
    rng = substream(seed, "reverse", *keys)
    z = rng.standard_normal(mixture.dim)
    trajectory = [z.copy()]
    for t in range(schedule.T, 0, -1):
        g_sigma = (schedule.sigma_at(t) if sigma_mode == "posterior"
                   else schedule.residual_sigma_at(t))
        if guidance is not None and guidance.active(t) and guide_target == "noisy":
            z = guide(z, guidance, g_sigma)
        z0_hat = gmm_posterior_mean(z, t, mixture, schedule)
        if guidance is not None and guidance.active(t) and guide_target == "denoised":
            z0_hat = guide(z0_hat, guidance, g_sigma)
        ab = schedule.alpha_bar_at(t)
        ab_prev = schedule.alpha_bar_before(t)
        beta = schedule.beta_at(t)
        coef_clean = math.sqrt(ab_prev) * beta / (1.0 - ab)
        coef_noisy = math.sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab)
        mean = coef_clean * z0_hat + coef_noisy * z
        noise = rng.standard_normal(mixture.dim)
        z = mean + schedule.sigma_at(t) * noise
        trajectory.append(z.copy())
    return np.array(trajectory), trajectory[-1]


def _kmeans_pp_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ center initialization."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
            idx = int(rng.choice(n, p=probs))
        else:
            # all remaining mass on already-chosen duplicates; pick any unchosen
            unchosen = [i for i in range(n) if i not in chosen]
            idx = unchosen[int(rng.integers(len(unchosen)))] if unchosen else chosen[0]
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(points, k: int, rng: np.random.Generator, max_iters: int = 100,
           init: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """One Lloyd run, seeded by k-means++ (or explicit initial centers).

    Returns (centers, assignment, per-iteration cost history). Empty
    clusters are repaired by handing them the farthest point of the largest
    cluster, which never increases the cost; the history is asserted
    non-increasing.
    """
    pts = as_float_matrix(points, "points")
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in 1..{n}, got {k}")
    centers = _kmeans_pp_seed(pts, k, rng) if init is None else np.array(init, dtype=float)
    if centers.shape != (k, pts.shape[1]):
        raise DomainError(f"init centers must have shape {(k, pts.shape[1])}")
    assign = np.full(n, -1)
    history: list[float] = []
    for _ in range(max_iters):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        for empty in range(k):
            if (new_assign == empty).any():
                continue
            counts = np.bincount(new_assign, minlength=k)
            donor = int(counts.argmax())
            members = np.nonzero(new_assign == donor)[0]
            far = members[int(d2[members, donor].argmax())]
            new_assign[far] = empty
            centers[empty] = pts[far]
        if (new_assign == assign).all():
            break
        assign = new_assign
        for c in range(k):
            centers[c] = pts[assign == c].mean(axis=0)
        cost = float(((pts - centers[assign]) ** 2).sum())
        assert not history or cost <= history[-1] + 1e-9 * max(1.0, history[-1]), \
            f"Lloyd cost increased: {history[-1]} -> {cost}"
        history.append(cost)
    return centers, assign, history


_EXHAUSTIVE_SEED_BUDGET = 60


def best_kmeans(points, k: int, seed: int, keys: tuple = (), n_init: int = 10,
                max_iters: int = 100) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Best of several Lloyd runs (lowest final cost wins).

    Runs n_init k-means++ restarts; on tiny instances (at most 60 distinct
    k-subsets of points) every subset is additionally tried as an initial
    center set, which in practice pins the global optimum. k-means++ alone
    concentrates restarts into one basin on few points.
    """
    pts = as_float_matrix(points, "points")
    n = pts.shape[0]
    inits: list[np.ndarray | None] = [None] * n_init
    if math.comb(n, k) <= _EXHAUSTIVE_SEED_BUDGET:
        inits.extend(pts[list(subset)] for subset in itertools.combinations(range(n), k))
    best = None
    for r, init in enumerate(inits):
        rng = substream(seed, "kmeans", *keys, r)
        centers, assign, history = kmeans(pts, k, rng, max_iters, init=init)
        if best is None or history[-1] < best[2][-1]:
            best = (centers, assign, history)
    return best


def interval_kmeans(items, plan: SamplingPlan, seed: int = 0, max_iters: int = 100,
                    n_init: int = 10) -> dict[int, np.ndarray]:
    """Cluster one class's latents per difficulty interval.

    For every interval with a positive plan target, runs k-means over the
    latents binned there and returns exactly targets[k] centers. Raises
    InsufficientSupply listing every interval whose population is below its
    target, ValidationError when latents are missing.
    """
    items = list(items)
    if not items:
        raise InsufficientSupply("no items to cluster")
    labels = {item.label for item in items}
    if len(labels) != 1:
        raise ValidationError(f"interval_kmeans expects a single class, got {sorted(labels)}")
    label = labels.pop()
    if any(item.latent is None for item in items):
        raise ValidationError(f"class {label!r}: items without latent vectors")

    bins: dict[int, list] = {}
    for item in items:
        bins.setdefault(bin_index(item.difficulty), []).append(item.latent)

    short = {k: (len(bins.get(k, ())), t) for k, t in enumerate(plan.targets)
             if t > 0 and len(bins.get(k, ())) < t}
    if short:
        detail = ", ".join(f"interval {k}: have {h}, need {t}" for k, (h, t) in short.items())
        raise InsufficientSupply(f"class {label!r}: {detail}")

    centers: dict[int, np.ndarray] = {}
    for k, target in enumerate(plan.targets):
        if target == 0:
            continue
        pts = np.array(bins[k], dtype=float)
        centers[k], _, _ = best_kmeans(pts, target, seed, keys=(label, k),
                                       n_init=n_init, max_iters=max_iters)
    return centers


def dag_run(original: Manifest, ipc: int, lambda_gui: float, t_stop: int,
            mixture: Mixture, seed: int = 0, schedule: NoiseSchedule | None = None,
            sigma_mode: str = "posterior", guide_target: str = "denoised",
            n_init: int = 10, max_iters: int = 100) -> tuple[Manifest, dict[str, dict[int, np.ndarray]]]:
    """Difficulty-aware generation end to end.

    Per class: scale the difficulty histogram to the item budget, cluster
    each interval's latents into as many centers as the plan assigns, then
    run one guided reverse trajectory per center. The output manifest holds
    ipc x classes generated latents; each item records its source interval
    (and center index in its id) with the interval midpoint as difficulty.
    """
    if original.latent_dim == 0:
        raise ValidationError("dag_run needs latent vectors on the original manifest")
    schedule = schedule or make_schedule()
    if original.latent_dim != mixture.dim:
        raise DomainError(
            f"latent dimension {original.latent_dim} does not match mixture dimension {mixture.dim}"
        )
    probe = GuidanceSpec(center=(0.0,) * mixture.dim, lambda_gui=lambda_gui, t_stop=t_stop)
    probe.validate_for(schedule.T)

    generated = []
    centers_by_class: dict[str, dict[int, np.ndarray]] = {}
    for label, items in sorted(original.by_label().items()):
        plan = scale_to_ipc(histogram([i.difficulty for i in items], label), ipc)
        centers = interval_kmeans(items, plan, seed=seed, max_iters=max_iters, n_init=n_init)
        centers_by_class[label] = centers
        for k in sorted(centers):
            for j, center in enumerate(centers[k]):
                spec = GuidanceSpec(center=tuple(float(x) for x in center),
                                    lambda_gui=lambda_gui, t_stop=t_stop)
                _, z0 = reverse_sample(schedule, mixture, spec, seed=seed,
                                       keys=(label, k, j), sigma_mode=sigma_mode,
                                       guide_target=guide_target)
                generated.append(make_item(
                    f"{label}/I{k}/c{j}", label,
                    difficulty=interval_midpoint(k),
                    latent=z0, interval=k,
                ))
    return build_manifest(generated, role="distilled"), centers_by_class
