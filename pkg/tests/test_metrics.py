import numpy as np
import pytest

from invflow.flow import InnModel, ModelConfig
from invflow.metrics import (
    PosteriorSamples,
    calibration_error,
    latent_grid,
    map_estimate,
    prior_mass_radius,
    resim_error,
    resim_errors_posterior,
    sample_posterior,
)
from invflow.problems import kinematics_forward, kinematics_problem


def test_map_estimate_finds_dominant_mode():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((1500, 2)) * 0.1 + np.array([2.0, -1.0])
    b = rng.standard_normal((300, 2)) * 0.1 + np.array([-2.0, 1.0])
    samples = np.concatenate([a, b])
    est = map_estimate(samples)
    np.testing.assert_allclose(est, [2.0, -1.0], atol=0.05)


def test_map_estimate_point_mass():
    samples = np.full((100, 3), 1.5)
    np.testing.assert_allclose(map_estimate(samples), [1.5, 1.5, 1.5])


def test_map_estimate_single_gaussian():
    rng = np.random.default_rng(1)
    samples = rng.standard_normal((4000, 2)) * 0.5 + np.array([0.3, -0.7])
    np.testing.assert_allclose(map_estimate(samples), [0.3, -0.7], atol=0.2)


def test_resim_error_is_euclidean_distance():
    prob = kinematics_problem()
    x = np.array([0.0, 0.0, 0.0, 0.0])
    y_star = np.array([0.0, 2.0])
    assert resim_error(prob, x, y_star) == pytest.approx(0.0, abs=1e-12)
    y_star = np.array([1.0, 2.0])
    assert resim_error(prob, x, y_star) == pytest.approx(1.0, abs=1e-12)


def test_resim_errors_posterior_shape():
    prob = kinematics_problem()
    rng = np.random.default_rng(2)
    x = prob.sample_prior(50, rng)
    post = PosteriorSamples(np.array([0.0, 1.5]), x, "abc")
    errs = resim_errors_posterior(prob, post)
    assert errs.shape == (50,)
    want = np.linalg.norm(kinematics_forward(x) - np.array([0.0, 1.5]), axis=1)
    np.testing.assert_allclose(errs, want, rtol=1e-12)


def test_calibration_perfect_posterior_is_calibrated():
    # Ground truths drawn jointly with the posterior samples from the same
    # Gaussian: coverage should match the nominal level.
    rng = np.random.default_rng(3)
    posts, truths = [], []
    for _ in range(300):
        mu = rng.standard_normal(2)
        posts.append(PosteriorSamples(np.zeros(2), mu + rng.standard_normal((1024, 2)), "analytic"))
        truths.append(mu + rng.standard_normal(2))
    curve = calibration_error(posts, truths)
    assert curve.median_error < 0.02
    assert curve.alphas.shape == curve.alpha_inl.shape


def test_calibration_point_mass_is_half():
    posts = [PosteriorSamples(np.zeros(2), np.zeros((64, 2)), "analytic") for _ in range(5)]
    truths = [np.ones(2) for _ in range(5)]
    curve = calibration_error(posts, truths)
    assert curve.median_error == 0.5


def test_calibration_overconfident_posterior_flagged():
    rng = np.random.default_rng(4)
    posts, truths = [], []
    for _ in range(200):
        mu = rng.standard_normal(2)
        posts.append(PosteriorSamples(np.zeros(2), mu + 0.1 * rng.standard_normal((512, 2)), "analytic"))
        truths.append(mu + rng.standard_normal(2))
    assert calibration_error(posts, truths).median_error > 0.2


def test_calibration_misaligned_inputs_raise():
    with pytest.raises(ValueError):
        calibration_error([], [])
    with pytest.raises(ValueError):
        calibration_error([PosteriorSamples(np.zeros(1), np.zeros((4, 1)), "analytic")], [])


def test_prior_mass_radius_reference_values():
    # Chi-squared with 2 dof: P(r < R) = 1 - exp(-R^2/2).
    assert prior_mass_radius(0.5) == pytest.approx(np.sqrt(2 * np.log(2.0)), rel=1e-12)
    assert 1.0 - np.exp(-prior_mass_radius(0.9) ** 2 / 2) == pytest.approx(0.9, rel=1e-12)


def test_sample_posterior_deterministic_and_shaped():
    cfg = ModelConfig(blocks=2, hidden=8, depth=2, width=6)
    model = InnModel(D=2, M=2, K=2, cfg=cfg, seed=0)
    y_star = np.array([1.0, 0.0])
    a = sample_posterior(model, y_star, 128, seed=5)
    b = sample_posterior(model, y_star, 128, seed=5)
    assert a.samples.shape == (128, 2)
    np.testing.assert_array_equal(a.samples, b.samples)
    c = sample_posterior(model, y_star, 128, seed=6)
    assert np.any(a.samples != c.samples)


def test_latent_grid_shape_and_determinism():
    cfg = ModelConfig(blocks=2, hidden=8, depth=2, width=6)
    model = InnModel(D=2, M=2, K=2, cfg=cfg, seed=1)
    centers = np.array([[1.0, 0.0], [-1.0, 0.0]])
    z, nearest, dist = latent_grid(model, np.array([1.0, 0.0]), centers, grid_points=11)
    assert z.shape == (121, 2)
    assert nearest.shape == (121,) and dist.shape == (121,)
    assert z.min() == -3.0 and z.max() == 3.0
    assert set(np.unique(nearest)) <= {0, 1}
    z2, nearest2, dist2 = latent_grid(model, np.array([1.0, 0.0]), centers, grid_points=11)
    np.testing.assert_array_equal(nearest, nearest2)
    np.testing.assert_array_equal(dist, dist2)
