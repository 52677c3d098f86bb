"""Experiment driver CLI.

Subcommands: train, sample, abc, evaluate, latent-grid. Exit codes:
0 success, 2 config or usage error, 3 numerical divergence, 4 ABC budget
exhaustion. All artifacts are plain CSV/JSON; floats are written with 17
significant digits so every value round-trips exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .artifact import ArtifactError, load_model, save_model
from .config import ConfigError, build_model_config, build_problem, build_train_config, load_config
from .flow import InnModel
from .problems import abc_quantile, abc_threshold
from .training import TrainingDiverged, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_ABC_BUDGET = 4

# Full-budget reference numbers for the kinematics benchmark, reported by
# the method's original evaluation at 10^6 training samples.
KINEMATICS_REFERENCE = {
    "mean_resim_error": 0.0139,
    "median_resim_error": 0.0113,
    "calibration_error": 0.0096,
}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path, header: list[str], rows, comments: list[str] = ()) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _parse_y_star(text: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",")], dtype=np.float64)
    except ValueError:
        raise ConfigError(f"cannot parse --y-star value {text!r}")


def cmd_train(args) -> int:
    doc = load_config(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    problem = build_problem(doc)
    model_cfg = build_model_config(doc, problem)
    train_cfg = build_train_config(doc)
    model = InnModel(problem.D, problem.M, problem.K, model_cfg, seed=doc.get("seed", 0))
    history = train(problem, model, train_cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "model.json", model, doc)
    _write_csv(
        out / "history.csv",
        ["epoch", "loss_y", "loss_z", "loss_x", "loss_pad", "lr"],
        [
            (e, history.loss_y[e], history.loss_z[e], history.loss_x[e],
             history.loss_pad[e], history.lr[e])
            for e in range(len(history))
        ],
    )
    (out / "run.json").write_text(json.dumps(doc, indent=2))
    return EXIT_OK


def _samples_csv(path, samples: np.ndarray) -> None:
    d = samples.shape[1]
    _write_csv(path, [f"x_{i}" for i in range(d)], [tuple(map(float, row)) for row in samples])


def cmd_sample(args) -> int:
    model, _ = load_model(args.model)
    y_star = _parse_y_star(args.y_star)
    if y_star.size != model.M:
        raise ConfigError(f"y_star width {y_star.size} != model observation width {model.M}")
    post = metrics.sample_posterior(model, y_star, args.n, args.seed)
    _samples_csv(args.out, post.samples)
    return EXIT_OK


def cmd_abc(args) -> int:
    doc = load_config(args.config)
    problem = build_problem(doc)
    y_star = _parse_y_star(args.y_star)
    if args.mode == "threshold":
        if args.epsilon is None:
            raise ConfigError("threshold mode needs --epsilon")
        result = abc_threshold(problem, y_star, args.epsilon, args.n, args.max_sims, args.seed)
    else:
        if args.quantile is None:
            raise ConfigError("quantile mode needs --quantile")
        result = abc_quantile(problem, y_star, args.quantile, args.n, args.seed)

    _samples_csv(args.out, result.samples)
    stats = {
        "simulations": result.simulations,
        "accepted": int(result.samples.shape[0]),
        "acceptance_rate": result.acceptance_rate,
        "exhausted": result.exhausted,
    }
    Path(args.out).with_name(Path(args.out).stem + "_stats.json").write_text(json.dumps(stats))
    print(
        f"abc: {stats['accepted']} samples from {stats['simulations']} simulations "
        f"(acceptance rate {stats['acceptance_rate']:.6g})"
    )
    return EXIT_ABC_BUDGET if result.exhausted else EXIT_OK


def _gmm_occupancy(problem, model, n, seed):
    centers = problem.mode_centers
    table = {}
    for label in range(problem.M):
        y_star = np.zeros(problem.M)
        y_star[label] = 1.0
        post = metrics.sample_posterior(model, y_star, n, seed + label)
        d2 = ((post.samples[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        counts = np.bincount(np.argmin(d2, axis=1), minlength=centers.shape[0])
        table[str(label)] = (counts / counts.sum()).tolist()
    return table


def cmd_evaluate(args) -> int:
    model, _ = load_model(args.model)
    doc = load_config(args.config)
    problem = build_problem(doc)
    ev = doc.get("evaluation", {})
    test_size = ev.get("test_size", 100)
    n_samp = ev.get("samples_per_posterior", 1024)
    seed = doc.get("seed", 0) + 7_000_000

    rng = np.random.default_rng(seed)
    test_x = problem.sample_prior(test_size, rng)
    test_y = problem.forward(test_x)

    posteriors = [
        metrics.sample_posterior(model, test_y[i], n_samp, seed + 1 + i)
        for i in range(test_size)
    ]
    rmse_total, rmse_per_dim, maps = metrics.rmse_map(
        problem, test_x, test_y, model, n_samp, seed + 1
    )
    pooled = np.concatenate(
        [metrics.resim_errors_posterior(problem, p) for p in posteriors]
    )
    map_resim = np.array(
        [metrics.resim_error(problem, maps[i], test_y[i]) for i in range(test_size)]
    )
    curve = metrics.calibration_error(posteriors, list(test_x))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "problem": problem.name,
        "test_size": test_size,
        "samples_per_posterior": n_samp,
        "rmse_map": rmse_total,
        "rmse_map_per_dimension": rmse_per_dim.tolist(),
        "mean_resim_error": float(pooled.mean()),
        "median_resim_error": float(np.median(pooled)),
        "map_mean_resim_error": float(map_resim.mean()),
        "calibration_median_error": curve.median_error,
    }
    if problem.name == "kinematics":
        report["paper_reference"] = KINEMATICS_REFERENCE
    if problem.mode_centers is not None:
        report["mode_occupancy_per_label"] = _gmm_occupancy(problem, model, n_samp, seed + 9000)
    (out / "report.json").write_text(json.dumps(report, indent=2))

    _write_csv(
        out / "calibration.csv",
        ["alpha", "alpha_inl"],
        list(zip(map(float, curve.alphas), map(float, curve.alpha_inl))),
    )
    if model.K == 2 and problem.mode_centers is not None:
        y_star = np.zeros(problem.M)
        y_star[0] = 1.0
        _write_latent_grid(out / "latent_grid.csv", model, y_star, problem.mode_centers,
                           ev.get("latent_grid_points", 41))
    return EXIT_OK


def _write_latent_grid(path, model, y_star, centers, grid_points) -> None:
    z, mode_id, dist = metrics.latent_grid(model, y_star, centers, grid_points)
    _write_csv(
        path,
        ["z0", "z1", "mode_id", "distance"],
        [(float(z[i, 0]), float(z[i, 1]), int(mode_id[i]), float(dist[i])) for i in range(z.shape[0])],
        comments=[
            f"prior_mass_radius_50={_fmt(metrics.prior_mass_radius(0.5))}",
            f"prior_mass_radius_90={_fmt(metrics.prior_mass_radius(0.9))}",
        ],
    )


def cmd_latent_grid(args) -> int:
    model, _ = load_model(args.model)
    doc = load_config(args.config)
    problem = build_problem(doc)
    if problem.mode_centers is None:
        raise ConfigError(f"problem {problem.name!r} has no mode centers for the grid analysis")
    y_star = _parse_y_star(args.y_star)
    grid_points = doc.get("evaluation", {}).get("latent_grid_points", 41)
    _write_latent_grid(args.out, model, y_star, problem.mode_centers, grid_points)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="invflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw posterior samples from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--y-star", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("abc", help="rejection-sampling oracle posterior")
    p.add_argument("--config", required=True)
    p.add_argument("--y-star", required=True)
    p.add_argument("--mode", choices=["threshold", "quantile"], required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--quantile", type=float, default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--max-sims", type=int, default=100_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_abc)

    p = sub.add_parser("evaluate", help="metric suite for a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("latent-grid", help="latent-space grid analysis")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--y-star", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_latent_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ArtifactError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
