"""Synthetic inverse problems and the ABC rejection-sampling oracle.

Two built-ins, addressable by name from the CLI:

* "gmm" -- 2-D eight-mode Gaussian mixture, forward map = one-hot label of
  the mode's color group. Exact posterior sampler available.
* "kinematics" -- planar three-joint arm on a vertical rail; forward map
  computes the end-effector position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class ProblemSpec:
    name: str
    D: int
    M: int
    K: int
    nominal_width: int
    sample_prior: Callable[[int, np.random.Generator], np.ndarray]
    forward: Callable[[np.ndarray], np.ndarray]  # (n, D) -> (n, M), pure
    posterior_sampler: Callable | None = None
    mode_centers: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Gaussian mixture

@dataclass
class GmmSpec:
    """Eight equally weighted modes on a circle, grouped into four labels.

    Modes are numbered clockwise starting at `angle_offset` (default: top
    of the circle). Modes 0-3 share label 0, modes 4-5 label 1, mode 6
    label 2, mode 7 label 3.
    """

    radius: float = 2.5
    angle_offset: float = math.pi / 2.0
    mode_std: float = 0.2
    label_of_mode: tuple = (0, 0, 0, 0, 1, 1, 2, 3)
    n_labels: int = 4

    def centers(self) -> np.ndarray:
        angles = self.angle_offset - 2.0 * math.pi * np.arange(8) / 8.0
        return self.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    def modes_of_label(self, label: int) -> np.ndarray:
        if not 0 <= label < self.n_labels:
            raise ValueError(f"label must be in 0..{self.n_labels - 1}, got {label}")
        return np.flatnonzero(np.asarray(self.label_of_mode) == label)


def gmm_sample(spec: GmmSpec, n: int, rng: np.random.Generator):
    """Draw (x, one-hot y) pairs from the mixture."""
    centers = spec.centers()
    modes = rng.integers(0, 8, size=n)
    x = centers[modes] + spec.mode_std * rng.standard_normal((n, 2))
    labels = np.asarray(spec.label_of_mode)[modes]
    y = np.zeros((n, spec.n_labels))
    y[np.arange(n), labels] = 1.0
    return x, y


def gmm_true_posterior(spec: GmmSpec, label: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact posterior draw: uniform over the label's modes, Gaussian within."""
    candidates = spec.modes_of_label(label)
    centers = spec.centers()
    picks = candidates[rng.integers(0, candidates.size, size=n)]
    return centers[picks] + spec.mode_std * rng.standard_normal((n, 2))


def gmm_problem(spec: GmmSpec | None = None, nominal_width: int = 16) -> ProblemSpec:
    spec = spec or GmmSpec()

    def sample_prior(n, rng):
        return gmm_sample(spec, n, rng)[0]

    def forward(x):
        centers = spec.centers()
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.asarray(spec.label_of_mode)[np.argmin(d2, axis=1)]
        y = np.zeros((x.shape[0], spec.n_labels))
        y[np.arange(x.shape[0]), labels] = 1.0
        return y

    return ProblemSpec(
        name="gmm",
        D=2,
        M=spec.n_labels,
        K=2,
        nominal_width=nominal_width,
        sample_prior=sample_prior,
        forward=forward,
        posterior_sampler=lambda label, n, rng: gmm_true_posterior(spec, label, n, rng),
        mode_centers=spec.centers(),
    )


# ---------------------------------------------------------------------------
# Inverse kinematics

@dataclass
class KinematicsSpec:
    lengths: tuple = (0.5, 0.5, 1.0)
    prior_stds: tuple = (0.25, 0.5, 0.5, 0.5)


def kinematics_forward(x: np.ndarray, spec: KinematicsSpec | None = None) -> np.ndarray:
    """End-effector position of the rail-mounted three-segment arm.

    Row layout: (rail offset, joint angle 1, 2, 3). Accepts a single
    4-vector or an (n, 4) batch.
    """
    spec = spec or KinematicsSpec()
    l1, l2, l3 = spec.lengths
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    a1 = x[:, 1]
    a2 = x[:, 2] - x[:, 1]
    a3 = x[:, 3] - x[:, 1] - x[:, 2]
    y1 = x[:, 0] + l1 * np.sin(a1) + l2 * np.sin(a2) + l3 * np.sin(a3)
    y2 = l1 * np.cos(a1) + l2 * np.cos(a2) + l3 * np.cos(a3)
    return np.stack([y1, y2], axis=1)


def kinematics_problem(spec: KinematicsSpec | None = None) -> ProblemSpec:
    spec = spec or KinematicsSpec()
    stds = np.asarray(spec.prior_stds)

    return ProblemSpec(
        name="kinematics",
        D=4,
        M=2,
        K=2,
        nominal_width=4,
        sample_prior=lambda n, rng: stds * rng.standard_normal((n, 4)),
        forward=lambda x: kinematics_forward(x, spec),
    )


_BUILTIN = {"gmm": gmm_problem, "kinematics": kinematics_problem}


def problem_by_name(name: str, **kwargs) -> ProblemSpec:
    try:
        factory = _BUILTIN[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; built-ins: {sorted(_BUILTIN)}") from None
    return factory(**kwargs)


# ---------------------------------------------------------------------------
# ABC rejection sampling

@dataclass
class AbcResult:
    samples: np.ndarray  # (n_accepted, D)
    simulations: int
    exhausted: bool = False

    @property
    def acceptance_rate(self) -> float:
        return self.samples.shape[0] / self.simulations if self.simulations else 0.0


def abc_threshold(
    problem: ProblemSpec,
    y_star: np.ndarray,
    epsilon: float,
    n: int,
    max_sims: int,
    seed: int,
    chunk: int = 65536,
) -> AbcResult:
    """Keep prior draws whose simulated observation lands within epsilon.

    Stops at n accepted samples or when the simulation budget runs out
    (partial result, `exhausted` set).
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if n < 1:
        raise ValueError("need n >= 1")
    y_star = np.asarray(y_star, dtype=np.float64).reshape(1, -1)
    rng = np.random.default_rng(seed)
    accepted: list[np.ndarray] = []
    total_kept = 0
    sims = 0
    while total_kept < n and sims < max_sims:
        batch = min(chunk, max_sims - sims)
        x = problem.sample_prior(batch, rng)
        dist = np.linalg.norm(problem.forward(x) - y_star, axis=1)
        keep = x[dist < epsilon]
        sims += batch
        if keep.shape[0]:
            take = min(keep.shape[0], n - total_kept)
            if take < keep.shape[0]:
                # Count only the simulations actually needed for sample n.
                last_idx = np.flatnonzero(dist < epsilon)[take - 1]
                sims -= batch - (last_idx + 1)
            accepted.append(keep[:take])
            total_kept += take
    samples = np.concatenate(accepted, axis=0) if accepted else np.empty((0, problem.D))
    return AbcResult(samples, int(sims), exhausted=total_kept < n)


def abc_quantile(
    problem: ProblemSpec,
    y_star: np.ndarray,
    q: float,
    n: int,
    seed: int,
) -> AbcResult:
    """Run exactly ceil(n / q) simulations and keep the n closest draws."""
    if not 0.0 < q <= 1.0:
        raise ValueError("quantile must lie in (0, 1]")
    if n < 1:
        raise ValueError("need n >= 1")
    y_star = np.asarray(y_star, dtype=np.float64).reshape(1, -1)
    sims = math.ceil(n / q)
    rng = np.random.default_rng(seed)
    x = problem.sample_prior(sims, rng)
    dist = np.linalg.norm(problem.forward(x) - y_star, axis=1)
    order = np.argsort(dist, kind="stable")[:n]
    return AbcResult(x[order], sims)
