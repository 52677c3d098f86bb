import numpy as np
import pytest

from invflow.problems import (
    GmmSpec,
    abc_quantile,
    abc_threshold,
    gmm_problem,
    gmm_sample,
    gmm_true_posterior,
    kinematics_forward,
    kinematics_problem,
    problem_by_name,
)


def test_gmm_centers_on_circle():
    spec = GmmSpec()
    c = spec.centers()
    assert c.shape == (8, 2)
    np.testing.assert_allclose(np.linalg.norm(c, axis=1), 2.5, rtol=1e-12)
    # First mode straight up, then clockwise in 45 degree steps.
    np.testing.assert_allclose(c[0], [0.0, 2.5], atol=1e-12)
    np.testing.assert_allclose(c[2], [2.5, 0.0], atol=1e-12)
    np.testing.assert_allclose(c[4], [0.0, -2.5], atol=1e-12)


def test_gmm_label_multiplicities():
    spec = GmmSpec()
    counts = np.bincount(np.asarray(spec.label_of_mode), minlength=4)
    np.testing.assert_array_equal(counts, [4, 2, 1, 1])


def test_gmm_sample_statistics():
    spec = GmmSpec()
    x, y = gmm_sample(spec, 40000, np.random.default_rng(0))
    assert x.shape == (40000, 2)
    assert y.shape == (40000, 4)
    np.testing.assert_array_equal(y.sum(axis=1), 1.0)
    centers = spec.centers()
    d = np.linalg.norm(x[:, None, :] - centers[None], axis=2)
    near = d.argmin(axis=1)
    assert np.all(d[np.arange(x.shape[0]), near] < 5 * spec.mode_std)
    occ = np.bincount(near, minlength=8) / x.shape[0]
    np.testing.assert_allclose(occ, 1 / 8, atol=0.01)


def test_gmm_forward_one_hot():
    prob = gmm_problem()
    spec = GmmSpec()
    y = prob.forward(spec.centers())
    assert y.shape == (8, 4)
    np.testing.assert_array_equal(y.sum(axis=1), 1.0)
    np.testing.assert_array_equal(y.argmax(axis=1), spec.label_of_mode)


def test_gmm_true_posterior_stays_on_label():
    spec = GmmSpec()
    lab = np.asarray(spec.label_of_mode)
    for label in range(4):
        x = gmm_true_posterior(spec, label, 2000, np.random.default_rng(label))
        d = np.linalg.norm(x[:, None, :] - spec.centers()[None], axis=2)
        near = d.argmin(axis=1)
        assert np.all(lab[near] == label)
        # Uniform over the label's modes.
        modes = np.flatnonzero(lab == label)
        occ = np.bincount(near, minlength=8)[modes] / x.shape[0]
        np.testing.assert_allclose(occ, 1 / modes.size, atol=0.05)


def test_kinematics_forward_reference_points():
    # Straight-up arm: all angles zero puts the effector at the summed
    # segment lengths above the base height x1.
    x = np.array([[0.3, 0.0, 0.0, 0.0]])
    np.testing.assert_allclose(kinematics_forward(x), [[0.3, 2.0]], atol=1e-12)
    # First joint at 90 degrees with the relative-angle convention: the
    # first segment points along +y1 and the other two fold back.
    x = np.array([[0.0, np.pi / 2, 0.0, 0.0]])
    np.testing.assert_allclose(kinematics_forward(x), [[-1.0, 0.0]], atol=1e-12)
    # All joints at 90 degrees: segments alternate directions.
    x = np.array([[0.0, np.pi / 2, np.pi / 2, np.pi / 2]])
    want = [[0.5 * 1 + 0.5 * 0 + 1.0 * (-1), 0.5 * 0 + 0.5 * 1 + 1.0 * 0]]
    np.testing.assert_allclose(kinematics_forward(x), want, atol=1e-12)


def test_kinematics_prior_stds():
    prob = kinematics_problem()
    x = prob.sample_prior(200000, np.random.default_rng(1))
    np.testing.assert_allclose(x.std(axis=0), [0.25, 0.5, 0.5, 0.5], rtol=0.02)
    np.testing.assert_allclose(x.mean(axis=0), 0.0, atol=0.01)


def test_problem_by_name():
    assert problem_by_name("gmm").name == "gmm"
    assert problem_by_name("kinematics").name == "kinematics"
    with pytest.raises(KeyError):
        problem_by_name("unknown")


def test_abc_threshold_accepts_only_close_samples():
    prob = kinematics_problem()
    y_star = np.array([0.0, 1.5])
    res = abc_threshold(prob, y_star, epsilon=0.2, n=300, max_sims=2_000_000, seed=0)
    assert not res.exhausted
    assert res.samples.shape == (300, 4)
    dist = np.linalg.norm(kinematics_forward(res.samples) - y_star, axis=1)
    assert np.all(dist < 0.2)
    assert 0.0 < res.acceptance_rate <= 1.0


def test_abc_threshold_budget_exhaustion():
    prob = kinematics_problem()
    res = abc_threshold(prob, np.array([0.0, 1.5]), epsilon=1e-5, n=10, max_sims=5000, seed=0)
    assert res.exhausted
    assert res.simulations == 5000
    assert res.samples.shape[0] < 10


def test_abc_quantile_simulation_count():
    prob = kinematics_problem()
    for n, q in ((100, 0.01), (37, 0.003), (5, 1.0)):
        res = abc_quantile(prob, np.array([0.0, 1.5]), q=q, n=n, seed=3)
        assert res.simulations == int(np.ceil(n / q))
        assert res.samples.shape == (n, 4)
        assert not res.exhausted


def test_abc_quantile_keeps_closest():
    prob = kinematics_problem()
    y_star = np.array([0.0, 1.5])
    res = abc_quantile(prob, y_star, q=0.05, n=50, seed=4)
    kept = np.linalg.norm(kinematics_forward(res.samples) - y_star, axis=1)
    # Reproduce the same prior draws and check the cutoff.
    x = prob.sample_prior(res.simulations, np.random.default_rng(4))
    dist = np.sort(np.linalg.norm(prob.forward(x) - y_star, axis=1))
    assert kept.max() <= dist[50 - 1] + 1e-12


def test_abc_determinism():
    prob = kinematics_problem()
    a = abc_threshold(prob, np.array([0.5, 1.0]), epsilon=0.3, n=100, max_sims=10**6, seed=7)
    b = abc_threshold(prob, np.array([0.5, 1.0]), epsilon=0.3, n=100, max_sims=10**6, seed=7)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert a.simulations == b.simulations


def test_abc_invalid_arguments():
    prob = kinematics_problem()
    with pytest.raises(ValueError):
        abc_threshold(prob, np.zeros(2), epsilon=-1.0, n=10, max_sims=100, seed=0)
    with pytest.raises(ValueError):
        abc_quantile(prob, np.zeros(2), q=0.0, n=10, seed=0)
    with pytest.raises(ValueError):
        abc_quantile(prob, np.zeros(2), q=1.5, n=10, seed=0)
