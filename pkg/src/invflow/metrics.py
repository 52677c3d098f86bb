"""Posterior evaluation: sampling, mean-shift MAP, RMSE, re-simulation
error, calibration curves, and the 2-D latent-grid analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flow import InnModel
from .problems import ProblemSpec


@dataclass
class PosteriorSamples:
    y_star: np.ndarray
    samples: np.ndarray  # (n, D)
    source: str  # "inn" | "abc" | "analytic"


@dataclass
class CalibrationCurve:
    alphas: np.ndarray
    alpha_inl: np.ndarray
    median_error: float


def sample_posterior(model: InnModel, y_star, n: int, seed: int) -> PosteriorSamples:
    """Condition the inverse pass on y_star with fresh standard-normal latents."""
    y_star = np.asarray(y_star, dtype=np.float64).reshape(1, -1)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, model.K))
    full = model.inverse_np(np.repeat(y_star, n, axis=0), z)
    return PosteriorSamples(y_star[0], full[:, : model.D], "inn")


def _silverman_bandwidth(samples: np.ndarray) -> float:
    n = samples.shape[0]
    per_dim = samples.std(axis=0, ddof=1) * (4.0 / (3.0 * n)) ** 0.2
    return float(per_dim.mean())


def map_estimate(
    samples: np.ndarray,
    tol: float = 1e-5,
    max_iter: int = 500,
    start_stride: int = 8,
) -> np.ndarray:
    """Mean-shift mode of a posterior sample set with a Gaussian kernel.

    Bandwidth is the per-dimension Silverman rule averaged over dimensions;
    every `start_stride`-th sample seeds an ascent, and the converged point
    with the highest kernel density wins.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise ValueError("map_estimate needs an (n, D) sample matrix")
    h = _silverman_bandwidth(samples)
    if h == 0.0 or samples.shape[0] == 1:
        return samples[0].copy()
    points = samples[::start_stride].copy()
    inv = -0.5 / (h * h)
    s_sq = (samples * samples).sum(axis=1)

    def kernel_weights(p):
        d2 = (p * p).sum(axis=1)[:, None] + s_sq[None, :] - 2.0 * (p @ samples.T)
        return np.exp(inv * d2)

    active = np.arange(points.shape[0])
    for _ in range(max_iter):
        w = kernel_weights(points[active])
        new = (w @ samples) / w.sum(axis=1)[:, None]
        moved = np.linalg.norm(new - points[active], axis=1) >= tol
        points[active] = new
        active = active[moved]
        if active.size == 0:
            break
    density = kernel_weights(points).sum(axis=1)
    return points[int(np.argmax(density))]


def resim_error(problem: ProblemSpec, x_hat: np.ndarray, y_star: np.ndarray) -> float:
    """Distance between the simulated observation of x_hat and y_star."""
    y_star = np.asarray(y_star, dtype=np.float64).reshape(1, -1)
    return float(np.linalg.norm(problem.forward(np.atleast_2d(x_hat)) - y_star, axis=1)[0])


def resim_errors_posterior(problem: ProblemSpec, post: PosteriorSamples) -> np.ndarray:
    """Re-simulation error of every posterior sample (not only the MAP)."""
    y = problem.forward(post.samples)
    return np.linalg.norm(y - post.y_star.reshape(1, -1), axis=1)


def rmse_map(
    problem: ProblemSpec,
    test_x: np.ndarray,
    test_y: np.ndarray,
    model: InnModel,
    samples_per_posterior: int,
    seed: int,
):
    """RMSE of mean-shift MAP estimates against ground truth.

    Returns (total rmse, per-dimension rmse, MAP estimates).
    """
    if test_x.shape[0] < 1:
        raise ValueError("empty test set")
    maps = np.empty_like(test_x)
    for i, y_star in enumerate(test_y):
        post = sample_posterior(model, y_star, samples_per_posterior, seed + i)
        maps[i] = map_estimate(post.samples)
    err = maps - test_x
    total = float(np.sqrt(np.mean(np.sum(err * err, axis=1))))
    per_dim = np.sqrt(np.mean(err * err, axis=0))
    return total, per_dim, maps


DEFAULT_ALPHAS = np.round(np.arange(1, 100) * 0.01, 2)


def calibration_error(
    posteriors: list[PosteriorSamples],
    ground_truths: list[np.ndarray],
    alphas: np.ndarray = DEFAULT_ALPHAS,
) -> CalibrationCurve:
    """Coverage of central per-dimension quantile intervals.

    For every confidence level alpha, a ground truth counts as an inlier in
    dimension d when it falls inside the central empirical
    [(1-alpha)/2, (1+alpha)/2] interval of that posterior marginal; the
    inlier fraction averages over (observation, dimension) pairs.
    """
    if len(posteriors) != len(ground_truths):
        raise ValueError("posteriors and ground truths are misaligned")
    if len(posteriors) == 0:
        raise ValueError("need at least one posterior")
    alphas = np.asarray(alphas, dtype=np.float64)
    lo_q = (1.0 - alphas) / 2.0
    hi_q = (1.0 + alphas) / 2.0
    inliers = np.zeros(alphas.size)
    count = 0
    for post, x_star in zip(posteriors, ground_truths):
        x_star = np.asarray(x_star, dtype=np.float64)
        lo = np.quantile(post.samples, lo_q, axis=0)  # (A, D)
        hi = np.quantile(post.samples, hi_q, axis=0)
        inside = (lo <= x_star[None, :]) & (x_star[None, :] <= hi)
        inliers += inside.sum(axis=1)
        count += x_star.size
    alpha_inl = inliers / count
    median_error = float(np.median(np.abs(alpha_inl - alphas)))
    return CalibrationCurve(alphas, alpha_inl, median_error)


def prior_mass_radius(mass: float) -> float:
    """Radius containing the given fraction of a 2-D standard normal."""
    return math.sqrt(-2.0 * math.log(1.0 - mass))


def latent_grid(
    model: InnModel,
    y_star,
    mode_centers: np.ndarray,
    grid_points: int = 41,
    extent: float = 3.0,
):
    """Map a regular 2-D latent grid through the inverse and tag each point
    with its nearest mode. Returns (z grid (G^2, 2), mode ids, distances)."""
    if model.K != 2:
        raise ValueError("latent grid analysis needs a 2-D latent space")
    axis = np.linspace(-extent, extent, grid_points)
    zz0, zz1 = np.meshgrid(axis, axis, indexing="xy")
    z = np.stack([zz0.ravel(), zz1.ravel()], axis=1)
    y_star = np.asarray(y_star, dtype=np.float64).reshape(1, -1)
    full = model.inverse_np(np.repeat(y_star, z.shape[0], axis=0), z)
    x = full[:, : model.D]
    centers = np.asarray(mode_centers, dtype=np.float64)
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d2, axis=1)
    dist = np.sqrt(d2[np.arange(x.shape[0]), nearest])
    return z, nearest, dist
