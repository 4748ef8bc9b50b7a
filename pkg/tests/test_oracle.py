import numpy as np
import pytest
from scipy.stats import norm

from pvgen import (
    OracleCapExceeded,
    TinyPvModel,
    box_partition_weights,
    cost_estimate,
    exact_posterior,
    generator_consistency_score,
    identity_weights,
    lr_likelihood,
)


def uniform_atlas(j, k):
    return np.full((j, k), 1.0 / k)


def simple_model(j=4, k=2, weights=None, means=(0.0, 10.0), variances=(1.0, 1.0), atlas=None):
    return TinyPvModel(
        n_classes=k,
        hr_dims=(j, 1, 1),
        atlas=uniform_atlas(j, k) if atlas is None else atlas,
        means=np.asarray(means, float),
        variances=np.asarray(variances, float),
        blur_weights=weights or identity_weights(j),
        m_ratio=1.0,
    )


class TestModelValidation:
    def test_atlas_rows_must_normalize(self):
        with pytest.raises(ValueError, match="atlas"):
            simple_model(atlas=np.full((4, 2), 0.4))

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum"):
            simple_model(weights=(((0, 0.5), (1, 0.4)), ((2, 1.0),), ((3, 1.0),)))

    def test_overlapping_support_rejected(self):
        weights = (((0, 0.5), (1, 0.5)), ((1, 0.5), (2, 0.5)), ((3, 1.0),))
        with pytest.raises(ValueError, match="overlap"):
            simple_model(weights=weights)

    def test_json_roundtrip(self, tmp_path):
        model = simple_model(j=3, weights=box_partition_weights(3, 3), means=(1.0, 2.0))
        model.save(tmp_path / "m.json")
        back = TinyPvModel.load(tmp_path / "m.json")
        assert back.n_classes == model.n_classes
        assert np.array_equal(back.atlas, model.atlas)
        assert back.blur_weights == model.blur_weights


class TestLrLikelihood:
    def test_identity_weights_match_pointwise_gaussians(self, rng):
        model = simple_model(j=5, means=(2.0, 7.0), variances=(1.5, 0.5))
        labels = rng.integers(0, 2, size=5)
        obs = rng.normal(size=5)
        expected = sum(
            norm.logpdf(obs[i], loc=model.means[labels[i]], scale=np.sqrt(model.variances[labels[i]]))
            for i in range(5)
        )
        assert lr_likelihood(model, labels, obs) == pytest.approx(expected, rel=1e-12)

    def test_two_voxel_average_closed_form(self):
        model = simple_model(
            j=2, weights=(((0, 0.5), (1, 0.5)),), means=(3.0, 9.0), variances=(4.0, 16.0)
        )
        obs = np.array([5.5])
        mean = (3.0 + 9.0) / 2
        var = (4.0 + 16.0) / 4
        expected = norm.logpdf(5.5, loc=mean, scale=np.sqrt(var))
        assert lr_likelihood(model, [0, 1], obs) == pytest.approx(float(expected), rel=1e-12)

    def test_translation_invariance(self, rng):
        labels = [0, 1, 1, 0]
        obs = rng.normal(size=4)
        base = simple_model(means=(1.0, 4.0))
        shifted = simple_model(means=(1.0 + 17.5, 4.0 + 17.5))
        assert lr_likelihood(base, labels, obs) == pytest.approx(
            lr_likelihood(shifted, labels, obs + 17.5), rel=1e-9
        )

    def test_zero_variance_mismatch_is_minus_inf(self):
        model = simple_model(j=2, means=(0.0, 5.0), variances=(0.0, 0.0))
        assert lr_likelihood(model, [0, 1], [0.0, 4.0]) == -np.inf
        assert lr_likelihood(model, [0, 1], [0.0, 5.0]) == 0.0


class TestExactPosterior:
    def test_normalizes(self, rng):
        model = simple_model(j=6, weights=box_partition_weights(6, 2))
        post = exact_posterior(model, rng.normal(5, 3, size=3))
        assert abs(post.probs.sum() - 1.0) < 1e-9

    def test_identity_blur_factorizes(self, rng):
        means = (0.0, 4.0)
        variances = (1.0, 2.0)
        model = simple_model(j=6, means=means, variances=variances)
        obs = rng.normal(2, 2, size=6)
        post = exact_posterior(model, obs)
        for j in range(6):
            dens = np.array(
                [norm.pdf(obs[j], loc=means[k], scale=np.sqrt(variances[k])) for k in range(2)]
            )
            expected = dens / dens.sum()
            assert np.max(np.abs(post.marginals[j] - expected)) < 1e-10

    def test_joint_equals_marginal_product_without_blur(self, rng):
        model = simple_model(j=4, means=(0.0, 3.0))
        obs = rng.normal(1.5, 1.5, size=4)
        post = exact_posterior(model, obs)
        joint = post.probs.reshape((2,) * 4)
        for idx in np.ndindex(*(2,) * 4):
            product = np.prod([post.marginals[j, idx[j]] for j in range(4)])
            assert joint[idx] == pytest.approx(product, abs=1e-10)

    def test_map_recovers_generated_truth(self):
        # truth constant within each LR box, so the averaged observation
        # identifies the configuration uniquely at 10 sigma separation
        truth = np.array([0, 0, 1, 1, 0, 0, 1, 1])
        model = simple_model(j=8, weights=box_partition_weights(8, 2), means=(0.0, 10.0))
        rng = np.random.default_rng(3)
        hr = model.means[truth] + rng.standard_normal(8)
        obs = hr.reshape(4, 2).mean(axis=1)
        post = exact_posterior(model, obs)
        assert np.array_equal(post.map_labels, truth)

    def test_class_permutation_equivariance(self, rng):
        atlas = np.array([[0.7, 0.3]] * 4)
        model = simple_model(j=4, atlas=atlas, means=(1.0, 6.0), variances=(2.0, 0.5))
        swapped = simple_model(
            j=4, atlas=atlas[:, ::-1], means=(6.0, 1.0), variances=(0.5, 2.0)
        )
        obs = rng.normal(3, 2, size=4)
        post = exact_posterior(model, obs)
        post_swapped = exact_posterior(swapped, obs)
        assert np.max(np.abs(post.marginals - post_swapped.marginals[:, ::-1])) < 1e-12

    def test_cap_refusal_reports_costs(self):
        model = TinyPvModel(
            n_classes=2,
            hr_dims=(24, 1, 1),
            atlas=uniform_atlas(24, 2),
            means=[0.0, 1.0],
            variances=[1.0, 1.0],
            blur_weights=identity_weights(24),
            m_ratio=3.0,
        )
        with pytest.raises(OracleCapExceeded, match="evaluations"):
            exact_posterior(model, np.zeros(24))

    def test_map_tie_breaks_lexicographic(self):
        # identical means: every configuration has equal likelihood
        model = simple_model(j=3, means=(5.0, 5.0), variances=(1.0, 1.0))
        post = exact_posterior(model, np.array([5.0, 5.0, 5.0]))
        assert np.array_equal(post.map_labels, [0, 0, 0])


class TestCostEstimate:
    @pytest.mark.parametrize("k,m,expected", [(2, 1, (2, 2)), (2, 3, (8, 4)), (3, 5, (96, 18))])
    def test_reference_values(self, k, m, expected):
        assert cost_estimate(k, m) == expected

    def test_closed_form_sweep(self):
        for k in range(2, 6):
            for m in range(1, 11):
                prior_ev, lik_ev = cost_estimate(k, m)
                assert prior_ev == k * (k - 1) * 2 ** (m - 1)
                assert lik_ev == k * (k - 1) * (1 + m) // 2

    def test_exponential_growth_in_m(self):
        priors = [cost_estimate(2, m)[0] for m in range(1, 11)]
        ratios = [b / a for a, b in zip(priors, priors[1:])]
        assert all(r == 2.0 for r in ratios)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            cost_estimate(1, 3)
        with pytest.raises(ValueError):
            cost_estimate(2, 0)


class TestGeneratorConsistency:
    def test_noiseless_identity_gets_full_mass(self):
        model = TinyPvModel(
            n_classes=2,
            hr_dims=(4, 1, 1),
            atlas=uniform_atlas(4, 2),
            means=[0.0, 10.0],
            variances=[0.0, 0.0],
            blur_weights=identity_weights(4),
        )
        score = generator_consistency_score(model, 20, np.random.default_rng(0))
        assert score["mean_true_mass"] == pytest.approx(1.0)
        assert score["marginal_accuracy"] == pytest.approx(1.0)

    def test_well_separated_boxes_accurate(self):
        # asymmetric atlas rows inside each averaging box: the prior
        # disambiguates which voxel of a mixed pair carries which class
        atlas = np.array([[0.97, 0.03], [0.03, 0.97]] * 3)
        model = TinyPvModel(
            n_classes=2,
            hr_dims=(6, 1, 1),
            atlas=atlas,
            means=[0.0, 10.0],
            variances=[1.0, 1.0],
            blur_weights=box_partition_weights(6, 2),
            m_ratio=2.0,
        )
        score = generator_consistency_score(model, 150, np.random.default_rng(1))
        assert score["marginal_accuracy"] > 0.99

    def test_uninformative_likelihood_falls_back_to_atlas(self):
        atlas = np.array([[0.7, 0.3]] * 5)
        model = TinyPvModel(
            n_classes=2,
            hr_dims=(5, 1, 1),
            atlas=atlas,
            means=[5.0, 5.0],
            variances=[1.0, 1.0],
            blur_weights=identity_weights(5),
        )
        score = generator_consistency_score(model, 300, np.random.default_rng(2))
        assert score["marginal_accuracy"] == pytest.approx(0.7, abs=0.05)
