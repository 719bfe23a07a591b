import math

import numpy as np
import pytest

from dgs import (
    Component,
    DegenerateDistribution,
    DomainError,
    GuidanceSpec,
    InsufficientSupply,
    Mixture,
    NoiseSchedule,
    SamplingPlan,
    ValidationError,
    dag_run,
    forward_diffuse,
    gmm_posterior_mean,
    guide,
    interval_kmeans,
    kmeans,
    make_schedule,
    reverse_sample,
    substream,
)
from dgs.dag import best_kmeans

from helpers import exhaustive_two_partition_cost, mc_posterior_oracle

TWO_COMP = Mixture(
    components=(
        Component(weight=0.5, mean=(-1.5, 0.5), std=0.45),
        Component(weight=0.5, mean=(1.0, -1.0), std=0.6),
    ),
    dim=2,
)


class TestSchedule:
    def test_default_constants(self):
        s = make_schedule()
        assert s.T == 50
        assert s.beta_at(1) == pytest.approx(1e-4)
        assert s.beta_at(50) == pytest.approx(0.02)
        assert (np.diff(s.alpha_bar) < 0).all()
        assert 0.55 < s.alpha_bar_at(50) < 0.65

    def test_final_step_is_exact(self):
        s = make_schedule()
        assert s.sigma_at(1) == 0.0
        assert all(s.sigma_at(t) > 0 for t in range(2, 51))

    def test_posterior_variance_identity(self):
        s = make_schedule()
        for t in (2, 17, 50):
            expected = (1 - s.alpha_bar_before(t)) / (1 - s.alpha_bar_at(t)) * s.beta_at(t)
            assert s.sigma_at(t) ** 2 == pytest.approx(expected, rel=1e-12)

    def test_alpha_bar_is_cumprod(self):
        s = make_schedule(T=5)
        manual = 1.0
        for t in range(1, 6):
            manual *= 1.0 - s.beta_at(t)
            assert s.alpha_bar_at(t) == pytest.approx(manual, rel=1e-12)
        assert s.alpha_bar_before(1) == 1.0

    @pytest.mark.parametrize("t", [0, 51, 1.5, True])
    def test_step_index_validated(self, t):
        with pytest.raises(DomainError):
            make_schedule().alpha_bar_at(t)

    @pytest.mark.parametrize("kwargs", [
        {"T": 0},
        {"T": 2.5},
        {"beta_start": 0.0},
        {"beta_start": 0.3, "beta_end": 0.2},
        {"beta_end": 1.0},
    ])
    def test_bad_schedule_args(self, kwargs):
        with pytest.raises(DomainError):
            make_schedule(**kwargs)

    def test_increasing_alpha_bar_rejected(self):
        with pytest.raises(DomainError):
            NoiseSchedule(T=2, beta=np.array([0.1, 0.1]),
                          alpha_bar=np.array([0.5, 0.9]), sigma=np.zeros(2))


class TestForwardDiffuse:
    def test_half_beta_single_step(self):
        s = make_schedule(T=1, beta_start=0.5, beta_end=0.5)
        out = forward_diffuse([1.0, 0.0], 1, s, [0.0, 1.0])
        np.testing.assert_allclose(out, [math.sqrt(0.5), math.sqrt(0.5)])

    def test_second_moment(self):
        s = make_schedule()
        rng = np.random.default_rng(31)
        d = 8
        z0 = np.zeros(d)
        t = 50
        draws = np.array([
            forward_diffuse(z0, t, s, rng.standard_normal(d)) for _ in range(20000)
        ])
        expected = (1 - s.alpha_bar_at(t)) * d
        assert (draws ** 2).sum(axis=1).mean() == pytest.approx(expected, rel=0.03)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            forward_diffuse([1.0], 1, make_schedule(), [0.0, 1.0])


class TestGuide:
    def test_zero_strength_is_identity(self):
        z = np.array([0.3, -0.7])
        spec = GuidanceSpec(center=(5.0, 5.0), lambda_gui=0.0, t_stop=0)
        np.testing.assert_array_equal(guide(z, spec, 0.8), z)

    def test_unit_pull_reaches_center(self):
        z = np.array([0.1, 0.9])
        spec = GuidanceSpec(center=(0.3, -0.2), lambda_gui=2.0, t_stop=0)
        np.testing.assert_allclose(guide(z, spec, 0.5), [0.3, -0.2], atol=1e-12)

    def test_result_stays_on_segment(self):
        rng = np.random.default_rng(37)
        for _ in range(50):
            z = rng.normal(size=3)
            c = rng.normal(size=3)
            lam = float(rng.uniform(0, 4))
            sigma = float(rng.uniform(0, 1))
            if lam * sigma > 1:
                continue
            out = guide(z, GuidanceSpec(center=tuple(c), lambda_gui=lam, t_stop=0), sigma)
            lo, hi = np.minimum(z, c), np.maximum(z, c)
            assert (out >= lo - 1e-12).all() and (out <= hi + 1e-12).all()

    def test_negative_sigma_rejected(self):
        spec = GuidanceSpec(center=(0.0,), lambda_gui=1.0, t_stop=0)
        with pytest.raises(DomainError):
            guide(np.array([1.0]), spec, -0.1)

    def test_dimension_mismatch(self):
        spec = GuidanceSpec(center=(0.0, 0.0), lambda_gui=1.0, t_stop=0)
        with pytest.raises(DomainError):
            guide(np.array([1.0]), spec, 0.5)


class TestGuidanceSpec:
    def test_negative_strength_rejected(self):
        with pytest.raises(DomainError):
            GuidanceSpec(center=(0.0,), lambda_gui=-0.5, t_stop=0)

    @pytest.mark.parametrize("t_stop", [1.5, "25", True])
    def test_t_stop_must_be_int(self, t_stop):
        with pytest.raises(DomainError):
            GuidanceSpec(center=(0.0,), lambda_gui=1.0, t_stop=t_stop)

    def test_validate_for_range(self):
        spec = GuidanceSpec(center=(0.0,), lambda_gui=1.0, t_stop=51)
        spec.validate_for(50)
        for bad in (-1, 52):
            with pytest.raises(DomainError):
                GuidanceSpec(center=(0.0,), lambda_gui=1.0, t_stop=bad).validate_for(50)

    def test_active_window_counts_down(self):
        spec = GuidanceSpec(center=(0.0,), lambda_gui=1.0, t_stop=25)
        assert spec.active(50) and spec.active(25)
        assert not spec.active(24) and not spec.active(1)

    def test_past_the_end_never_active(self):
        spec = GuidanceSpec(center=(0.0,), lambda_gui=1.0, t_stop=51)
        assert not any(spec.active(t) for t in range(1, 51))


class TestGmmPosteriorMean:
    def test_point_mass_component_is_fixed_point(self):
        m = Mixture(components=(Component(weight=1.0, mean=(2.0, -3.0), std=0.0),), dim=2)
        s = make_schedule()
        out = gmm_posterior_mean(np.array([100.0, 100.0]), 50, m, s)
        np.testing.assert_array_equal(out, [2.0, -3.0])

    def test_no_noise_limit_returns_observation(self):
        s = make_schedule(T=1, beta_start=1e-12, beta_end=1e-12)
        m = Mixture(components=(Component(weight=1.0, mean=(0.0, 0.0), std=1.0),), dim=2)
        z = np.array([0.7, -0.2])
        np.testing.assert_allclose(gmm_posterior_mean(z, 1, m, s), z, atol=1e-9)

    def test_full_noise_limit_returns_prior_mean(self):
        s = NoiseSchedule(T=1, beta=np.array([1.0 - 1e-12]),
                          alpha_bar=np.array([1e-12]), sigma=np.array([0.0]))
        out = gmm_posterior_mean(np.array([0.3, 0.4]), 1, TWO_COMP, s)
        prior_mean = TWO_COMP.weights() @ TWO_COMP.means()
        np.testing.assert_allclose(out, prior_mean, atol=1e-5)

    def test_matches_monte_carlo(self):
        s = make_schedule()
        rng = np.random.default_rng(41)
        cases = [(np.array([0.5, -0.5]), 50), (np.array([-1.0, 0.3]), 25),
                 (np.array([0.9, -0.9]), 5)]
        for z_t, t in cases:
            est, se = mc_posterior_oracle(z_t, t, TWO_COMP, s, 200_000, rng)
            closed = gmm_posterior_mean(z_t, t, TWO_COMP, s)
            assert (np.abs(closed - est) <= 4 * se + 1e-9).all(), (z_t, t, closed, est, se)

    def test_degenerate_when_pointmass_and_no_noise(self):
        s = NoiseSchedule(T=1, beta=np.array([0.0]), alpha_bar=np.array([1.0]),
                          sigma=np.array([0.0]))
        m = Mixture(components=(Component(weight=1.0, mean=(0.0,), std=0.0),), dim=1)
        with pytest.raises(DegenerateDistribution):
            gmm_posterior_mean(np.array([0.5]), 1, m, s)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            gmm_posterior_mean(np.array([0.5]), 1, TWO_COMP, make_schedule())


class TestMixture:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(DomainError):
            Mixture(components=(Component(weight=0.7, mean=(0.0,), std=1.0),), dim=1)

    def test_component_dimension_checked(self):
        with pytest.raises(DomainError):
            Mixture(components=(Component(weight=1.0, mean=(0.0, 0.0), std=1.0),), dim=1)

    def test_from_config_round_trip(self):
        cfg = {"dim": 2, "components": [
            {"weight": 0.5, "mean": [-1.5, 0.5], "std": 0.45},
            {"weight": 0.5, "mean": [1.0, -1.0], "std": 0.6},
        ]}
        assert Mixture.from_config(cfg) == TWO_COMP

    @pytest.mark.parametrize("cfg", [
        {"components": []},
        {"dim": 2},
        {"dim": 2, "components": [{"weight": 1.0, "mean": [0, 0]}]},
        {"dim": 2, "components": [{"weight": 1.0, "mean": "xy", "std": 1.0}]},
    ])
    def test_from_config_rejects(self, cfg):
        with pytest.raises(ValidationError):
            Mixture.from_config(cfg)

    def test_sample_statistics(self):
        rng = np.random.default_rng(43)
        draws = TWO_COMP.sample(rng, 40_000)
        assert draws.shape == (40_000, 2)
        prior_mean = TWO_COMP.weights() @ TWO_COMP.means()
        np.testing.assert_allclose(draws.mean(axis=0), prior_mean, atol=0.05)

    def test_point_mass_sampling(self):
        m = Mixture(components=(Component(weight=1.0, mean=(3.0, 4.0), std=0.0),), dim=2)
        draws = m.sample(np.random.default_rng(0), 5)
        np.testing.assert_array_equal(draws, np.tile([3.0, 4.0], (5, 1)))


class TestReverseSample:
    def test_trajectory_shape_and_final(self):
        s = make_schedule()
        traj, z0 = reverse_sample(s, TWO_COMP, seed=1)
        assert traj.shape == (51, 2)
        np.testing.assert_array_equal(traj[-1], z0)
        assert np.isfinite(traj).all()

    def test_deterministic_per_seed_and_keys(self):
        s = make_schedule()
        a = reverse_sample(s, TWO_COMP, seed=2, keys=("x",))[1]
        b = reverse_sample(s, TWO_COMP, seed=2, keys=("x",))[1]
        c = reverse_sample(s, TWO_COMP, seed=2, keys=("y",))[1]
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_zero_strength_matches_unguided_exactly(self):
        s = make_schedule()
        spec = GuidanceSpec(center=(9.0, 9.0), lambda_gui=0.0, t_stop=25)
        guided = reverse_sample(s, TWO_COMP, spec, seed=3)[0]
        plain = reverse_sample(s, TWO_COMP, None, seed=3)[0]
        np.testing.assert_array_equal(guided, plain)

    def test_disabled_window_matches_unguided_exactly(self):
        s = make_schedule()
        spec = GuidanceSpec(center=(9.0, 9.0), lambda_gui=3.0, t_stop=s.T + 1)
        guided = reverse_sample(s, TWO_COMP, spec, seed=4)[0]
        plain = reverse_sample(s, TWO_COMP, None, seed=4)[0]
        np.testing.assert_array_equal(guided, plain)

    def test_guidance_pulls_toward_center(self):
        s = make_schedule()
        center = (1.0, -1.0)
        spec = GuidanceSpec(center=center, lambda_gui=3.0, t_stop=25)
        wins = 0
        for seed in range(30):
            guided = reverse_sample(s, TWO_COMP, spec, seed=seed)[1]
            plain = reverse_sample(s, TWO_COMP, None, seed=seed)[1]
            if np.linalg.norm(guided - center) < np.linalg.norm(plain - center):
                wins += 1
        assert wins >= 20

    def test_alternative_modes_run(self):
        s = make_schedule()
        spec = GuidanceSpec(center=(1.0, -1.0), lambda_gui=2.0, t_stop=25)
        base = reverse_sample(s, TWO_COMP, spec, seed=5)[1]
        residual = reverse_sample(s, TWO_COMP, spec, seed=5, sigma_mode="residual")[1]
        noisy = reverse_sample(s, TWO_COMP, spec, seed=5, guide_target="noisy")[1]
        assert np.isfinite(residual).all() and np.isfinite(noisy).all()
        assert not np.array_equal(base, residual)
        assert not np.array_equal(base, noisy)

    @pytest.mark.parametrize("kwargs", [
        {"sigma_mode": "gaussian"},
        {"guide_target": "both"},
    ])
    def test_bad_mode(self, kwargs):
        with pytest.raises(DomainError):
            reverse_sample(make_schedule(), TWO_COMP, seed=0, **kwargs)

    def test_center_dimension_checked(self):
        spec = GuidanceSpec(center=(1.0,), lambda_gui=1.0, t_stop=25)
        with pytest.raises(DomainError):
            reverse_sample(make_schedule(), TWO_COMP, spec)

    def test_t_stop_out_of_range(self):
        spec = GuidanceSpec(center=(1.0, -1.0), lambda_gui=1.0, t_stop=99)
        with pytest.raises(DomainError):
            reverse_sample(make_schedule(), TWO_COMP, spec)


class TestKmeans:
    def test_single_cluster_is_mean(self):
        rng = np.random.default_rng(47)
        pts = rng.normal(size=(20, 3))
        centers, assign, history = kmeans(pts, 1, substream(0, "kmeans"))
        np.testing.assert_allclose(centers[0], pts.mean(axis=0))
        assert (assign == 0).all()
        assert history[-1] == pytest.approx(((pts - pts.mean(axis=0)) ** 2).sum())

    def test_k_equals_n_zero_cost(self):
        rng = np.random.default_rng(53)
        pts = rng.normal(size=(6, 2))
        centers, assign, history = best_kmeans(pts, 6, seed=0)
        assert history[-1] == pytest.approx(0.0, abs=1e-18)
        assert sorted(map(tuple, centers)) == sorted(map(tuple, pts))
        assert sorted(assign.tolist()) == list(range(6))

    def test_cost_history_non_increasing(self):
        rng = np.random.default_rng(59)
        for trial in range(20):
            pts = rng.normal(size=(40, 2))
            _, _, history = kmeans(pts, 4, substream(trial, "kmeans"))
            assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_empty_cluster_repair(self):
        pts = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 0.0]])
        init = np.array([[100.0, 100.0], [0.0, 0.0]])
        centers, assign, history = kmeans(pts, 2, substream(0, "kmeans"), init=init)
        assert len(set(assign.tolist())) == 2
        assert history[-1] == pytest.approx(0.005)

    def test_matches_exhaustive_partition_search(self):
        rng = np.random.default_rng(61)
        for trial in range(30):
            pts = rng.normal(size=(6, 2))
            _, _, history = best_kmeans(pts, 2, seed=trial)
            assert history[-1] == pytest.approx(exhaustive_two_partition_cost(pts), rel=1e-9)

    def test_best_kmeans_deterministic(self):
        rng = np.random.default_rng(67)
        pts = rng.normal(size=(30, 2))
        a = best_kmeans(pts, 3, seed=9)[0]
        b = best_kmeans(pts, 3, seed=9)[0]
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("k", [0, 7])
    def test_k_range(self, k):
        pts = np.zeros((6, 2)) + np.arange(6)[:, None]
        with pytest.raises(DomainError):
            kmeans(pts, k, substream(0, "kmeans"))

    def test_init_shape_checked(self):
        pts = np.arange(8, dtype=float).reshape(4, 2)
        with pytest.raises(DomainError):
            kmeans(pts, 2, substream(0, "kmeans"), init=np.zeros((3, 2)))


def class_items(label, difficulties, latents):
    from dgs.manifest import make_item

    return [
        make_item(f"{label}-{i}", label, difficulty=float(d), latent=tuple(v))
        for i, (d, v) in enumerate(zip(difficulties, latents))
    ]


class TestIntervalKmeans:
    def test_center_counts_match_plan(self):
        rng = np.random.default_rng(71)
        difficulties = [0.05] * 6 + [0.55] * 5 + [0.95] * 4
        items = class_items("c", difficulties, rng.normal(size=(15, 3)))
        plan = SamplingPlan(label="c", targets=(2, 0, 0, 0, 0, 3, 0, 0, 0, 1), ipc=6)
        centers = interval_kmeans(items, plan, seed=0)
        assert set(centers) == {0, 5, 9}
        assert centers[0].shape == (2, 3)
        assert centers[5].shape == (3, 3)
        assert centers[9].shape == (1, 3)

    def test_insufficient_lists_every_short_interval(self):
        rng = np.random.default_rng(73)
        items = class_items("c", [0.05, 0.55], rng.normal(size=(2, 2)))
        plan = SamplingPlan(label="c", targets=(2, 0, 0, 0, 0, 2, 0, 0, 0, 0), ipc=4)
        with pytest.raises(InsufficientSupply) as exc:
            interval_kmeans(items, plan, seed=0)
        msg = str(exc.value)
        assert "interval 0: have 1, need 2" in msg
        assert "interval 5: have 1, need 2" in msg

    def test_missing_latents(self):
        from dgs.manifest import make_item

        items = [make_item("c-0", "c", difficulty=0.5)]
        plan = SamplingPlan(label="c", targets=(0, 0, 0, 0, 0, 1, 0, 0, 0, 0), ipc=1)
        with pytest.raises(ValidationError):
            interval_kmeans(items, plan, seed=0)

    def test_mixed_labels(self):
        rng = np.random.default_rng(79)
        items = class_items("a", [0.5], rng.normal(size=(1, 2)))
        items += class_items("b", [0.5], rng.normal(size=(1, 2)))
        plan = SamplingPlan(label="a", targets=(0, 0, 0, 0, 0, 2, 0, 0, 0, 0), ipc=2)
        with pytest.raises(ValidationError):
            interval_kmeans(items, plan, seed=0)

    def test_empty(self):
        plan = SamplingPlan(label="c", targets=(1,) + (0,) * 9, ipc=1)
        with pytest.raises(InsufficientSupply):
            interval_kmeans([], plan, seed=0)


class TestDagRun:
    def build_original(self, classes=("a", "b"), per_class=30, dim=2, seed=83):
        from dgs.manifest import build_manifest

        rng = np.random.default_rng(seed)
        items = []
        for label in classes:
            difficulties = rng.uniform(0.0, 1.0, per_class)
            latents = rng.normal(size=(per_class, dim))
            items.extend(class_items(label, difficulties, latents))
        return build_manifest(items, role="original")

    def test_output_cardinality_and_annotations(self):
        original = self.build_original()
        distilled, centers = dag_run(original, ipc=4, lambda_gui=2.0, t_stop=25,
                                     mixture=TWO_COMP, seed=0)
        assert distilled.role == "distilled"
        assert len(distilled.items) == 8
        assert set(centers) == {"a", "b"}
        for label in centers:
            assert sum(c.shape[0] for c in centers[label].values()) == 4
        for item in distilled.items:
            assert item.interval is not None
            assert item.difficulty == pytest.approx((2 * item.interval + 1) / 20)
            assert len(item.latent) == 2
            label, interval_tag, center_tag = item.id.split("/")
            assert interval_tag == f"I{item.interval}"
            assert center_tag.startswith("c")

    def test_deterministic(self):
        original = self.build_original()
        a = dag_run(original, ipc=3, lambda_gui=1.0, t_stop=25, mixture=TWO_COMP)[0]
        b = dag_run(original, ipc=3, lambda_gui=1.0, t_stop=25, mixture=TWO_COMP)[0]
        assert a == b

    def test_requires_latents(self):
        from dgs.manifest import build_manifest, make_item

        plain = build_manifest(
            [make_item(f"a-{i}", "a", difficulty=0.5) for i in range(5)], role="original"
        )
        with pytest.raises(ValidationError):
            dag_run(plain, ipc=1, lambda_gui=1.0, t_stop=25, mixture=TWO_COMP)

    def test_dimension_mismatch(self):
        original = self.build_original(dim=3)
        with pytest.raises(DomainError):
            dag_run(original, ipc=2, lambda_gui=1.0, t_stop=25, mixture=TWO_COMP)

    def test_t_stop_validated(self):
        original = self.build_original()
        with pytest.raises(DomainError):
            dag_run(original, ipc=2, lambda_gui=1.0, t_stop=99, mixture=TWO_COMP)
