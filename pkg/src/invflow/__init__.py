"""Posterior learning for ambiguous inverse problems with an invertible
network, validated against an ABC rejection-sampling oracle."""

from .autodiff import Node, NonFiniteError, Parameter, ShapeError, Subnet, adam_step, backward
from .flow import CouplingBlock, FlowOutput, InnModel, ModelConfig, PermutationLayer
from .mmd import BACKEND_NAME, KernelSpec, kernel_eval, kernel_matrix, mmd2
from .problems import (
    GmmSpec,
    KinematicsSpec,
    ProblemSpec,
    abc_quantile,
    abc_threshold,
    gmm_problem,
    gmm_sample,
    gmm_true_posterior,
    kinematics_forward,
    kinematics_problem,
    problem_by_name,
)
from .training import TrainConfig, TrainHistory, TrainingDiverged, lr_at, train
from .metrics import (
    CalibrationCurve,
    PosteriorSamples,
    calibration_error,
    latent_grid,
    map_estimate,
    resim_error,
    resim_errors_posterior,
    rmse_map,
    sample_posterior,
)
from .artifact import load_model, save_model

__version__ = "0.1.0"
