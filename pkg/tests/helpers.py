"""Shared fixture generators and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np

from dgs import Manifest, build_manifest, make_item
from dgs.distribution import bin_index


def make_synthetic(classes: int = 10, orig_per_class: int = 250,
                   pool_per_class: int = 250, seed: int = 20260819,
                   with_latents: bool = False, latent_dim: int = 4):
    """Original difficulties ~ Beta(2,5); easy-biased pool ~ Beta(1,8).

    Returns (original, pool, truth) where truth records the generated
    per-class interval counts for both manifests.
    """
    rng = np.random.default_rng(seed)
    labels = [f"class{c:02d}" for c in range(classes)]
    orig_items, pool_items = [], []
    truth = {"original": {}, "pool": {}}
    for label in labels:
        o_vals = rng.beta(2, 5, orig_per_class)
        p_vals = rng.beta(1, 8, pool_per_class)
        o_counts = [0] * 10
        p_counts = [0] * 10
        for i, v in enumerate(o_vals):
            o_counts[bin_index(v)] += 1
            latent = rng.standard_normal(latent_dim).tolist() if with_latents else None
            orig_items.append(make_item(f"orig/{label}/{i}", label,
                                        difficulty=float(v), latent=latent))
        for i, v in enumerate(p_vals):
            p_counts[bin_index(v)] += 1
            latent = rng.standard_normal(latent_dim).tolist() if with_latents else None
            pool_items.append(make_item(f"pool/{label}/{i}", label,
                                        difficulty=float(v), latent=latent))
        truth["original"][label] = o_counts
        truth["pool"][label] = p_counts
    return (build_manifest(orig_items, role="original"),
            build_manifest(pool_items, role="pool"),
            truth)


def log_mixture_pdf(z0: np.ndarray, mixture) -> np.ndarray:
    """Log density of rows of z0 under an isotropic Gaussian mixture."""
    w = mixture.weights()
    mu = mixture.means()
    s = mixture.stds()
    d = mixture.dim
    parts = np.empty((z0.shape[0], len(w)))
    for i in range(len(w)):
        sq = ((z0 - mu[i]) ** 2).sum(axis=1)
        parts[:, i] = np.log(w[i]) - 0.5 * (d * np.log(2 * np.pi * s[i] ** 2) + sq / s[i] ** 2)
    m = parts.max(axis=1, keepdims=True)
    return m[:, 0] + np.log(np.exp(parts - m).sum(axis=1))


def mc_posterior_oracle(z_t: np.ndarray, t: int, mixture, schedule, n: int,
                        rng: np.random.Generator):
    """Monte-Carlo estimate of E[z0 | z_t] by importance sampling.

    Defensive proposal: half the draws come from the mixture prior, half
    from a Gaussian centered on the likelihood peak z_t / sqrt(ab) with the
    likelihood's own width (inflated 2x), which keeps the effective sample
    size healthy even when the forward noise is tiny. Returns (estimate,
    per-axis standard error).
    """
    ab = schedule.alpha_bar_at(t)
    d = mixture.dim
    peak = z_t / np.sqrt(ab)
    peak_std = 2.0 * np.sqrt((1.0 - ab) / ab)
    half = n // 2
    z0 = np.vstack([mixture.sample(rng, half),
                    peak[None, :] + peak_std * rng.standard_normal((n - half, d))])
    log_prior = log_mixture_pdf(z0, mixture)
    sq_peak = ((z0 - peak[None, :]) ** 2).sum(axis=1)
    log_peak = -0.5 * (d * np.log(2 * np.pi * peak_std ** 2) + sq_peak / peak_std ** 2)
    m = np.maximum(log_prior, log_peak)
    log_q = m + np.log(0.5 * np.exp(log_prior - m) + 0.5 * np.exp(log_peak - m))
    resid = z_t[None, :] - np.sqrt(ab) * z0
    log_lik = -0.5 * (resid ** 2).sum(axis=1) / (1.0 - ab)
    logw = log_prior + log_lik - log_q
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    est = (w[:, None] * z0).sum(axis=0)
    var = (w[:, None] ** 2 * (z0 - est[None, :]) ** 2).sum(axis=0)
    return est, np.sqrt(var)


def exhaustive_two_partition_cost(points: np.ndarray) -> float:
    """Minimum within-cluster sum of squares over all 2-partitions."""
    n = len(points)
    best = np.inf
    for r in range(1, n // 2 + 1):
        for subset in itertools.combinations(range(n), r):
            rest = [i for i in range(n) if i not in subset]
            a = points[list(subset)]
            b = points[rest]
            cost = ((a - a.mean(axis=0)) ** 2).sum() + ((b - b.mean(axis=0)) ** 2).sum()
            best = min(best, cost)
    return float(best)


def energy_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Multivariate energy distance between two samples."""

    def mean_pdist(a, b):
        return float(np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)).mean())

    return 2.0 * mean_pdist(x, y) - mean_pdist(x, x) - mean_pdist(y, y)


def manifest_bytes(manifest: Manifest) -> bytes:
    """Serialized manifest content for byte-identity comparisons."""
    import json

    return "\n".join(
        json.dumps(item.to_record()) for item in manifest.items
    ).encode() + b"\n"
