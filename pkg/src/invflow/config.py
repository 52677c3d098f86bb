"""Experiment configuration: JSON documents with strict schema validation.

Unknown keys are errors; every value is type- and range-checked before any
work starts. The two shipped config files under configs/ reproduce the
desk-scale synthetic experiments.
"""

from __future__ import annotations

import json
from pathlib import Path

from .flow import ModelConfig
from .mmd import INVERSE_MULTIQUADRATIC, MULTIQUADRATIC, KernelSpec
from .problems import GmmSpec, KinematicsSpec, ProblemSpec, gmm_problem, kinematics_problem
from .training import TrainConfig


class ConfigError(ValueError):
    pass


_KERNEL_SCHEMA = {"kind": str, "bandwidth": (int, float)}

_SCHEMA = {
    "problem": {
        "name": str,
        "overrides": {
            "nominal_width": int,
            "radius": (int, float),
            "mode_std": (int, float),
            "angle_offset": (int, float),
            "lengths": list,
            "prior_stds": list,
        },
    },
    "model": {
        "blocks": int,
        "hidden": int,
        "depth": int,
        "slope": (int, float),
        "clamp": (int, float),
    },
    "training": {
        "epochs": int,
        "batches_per_epoch": int,
        "batch_size": int,
        "lr_start": (int, float),
        "lr_end": (int, float),
        "w_y": (int, float),
        "w_z": (int, float),
        "w_x": (int, float),
        "w_pad": (int, float),
        "sigma_pad": (int, float),
        "z_kernel": _KERNEL_SCHEMA,
        "x_kernel": _KERNEL_SCHEMA,
    },
    "evaluation": {
        "test_size": int,
        "samples_per_posterior": int,
        "latent_grid_points": int,
        "y_star": list,
    },
    "seed": int,
}


def _validate(doc, schema, path=""):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    for key, value in doc.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key {here!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            _validate(value, expected, here)
        elif not isinstance(value, expected) or isinstance(value, bool):
            raise ConfigError(f"config key {here!r} has wrong type {type(value).__name__}")


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    _validate(doc, _SCHEMA)
    if "problem" not in doc or "name" not in doc["problem"]:
        raise ConfigError("config needs problem.name")
    return doc


def build_problem(doc: dict) -> ProblemSpec:
    name = doc["problem"]["name"]
    overrides = dict(doc["problem"].get("overrides", {}))
    if name == "gmm":
        width = overrides.pop("nominal_width", 16)
        spec = GmmSpec(**overrides) if overrides else GmmSpec()
        return gmm_problem(spec, nominal_width=width)
    if name == "kinematics":
        if overrides:
            overrides = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
            return kinematics_problem(KinematicsSpec(**overrides))
        return kinematics_problem()
    raise ConfigError(f"unknown problem {name!r}")


def build_model_config(doc: dict, problem: ProblemSpec) -> ModelConfig:
    section = doc.get("model", {})
    return ModelConfig(
        blocks=section.get("blocks", 3),
        hidden=section.get("hidden", 64),
        depth=section.get("depth", 3),
        slope=section.get("slope", 0.01),
        clamp=section.get("clamp", 2.0),
        width=problem.nominal_width,
    )


def _kernel(section: dict | None) -> KernelSpec:
    if not section:
        return KernelSpec()
    kind = section.get("kind", INVERSE_MULTIQUADRATIC)
    aliases = {"imq": INVERSE_MULTIQUADRATIC, "mq": MULTIQUADRATIC}
    try:
        return KernelSpec(aliases.get(kind, kind), float(section.get("bandwidth", 1.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_train_config(doc: dict, seed: int | None = None) -> TrainConfig:
    section = dict(doc.get("training", {}))
    z_kernel = _kernel(section.pop("z_kernel", None))
    x_kernel = _kernel(section.pop("x_kernel", None))
    if seed is None:
        seed = doc.get("seed", 0)
    try:
        return TrainConfig(z_kernel=z_kernel, x_kernel=x_kernel, seed=seed, **section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
