"""Bidirectional training of the invertible model.

Each batch runs a forward pass (supervised observation loss, latent
independence loss with a gradient block on the observation columns,
output-padding penalty) and a backward pass (prior-matching loss on
generated x, padding reconstruction loss). Gradients from both directions
pool in the parameter accumulators before one Adam step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .flow import InnModel
from .mmd import KernelSpec, mmd2
from .problems import ProblemSpec

LOSS_CAP = 1e6


class TrainingDiverged(RuntimeError):
    def __init__(self, term: str, epoch: int, value: float):
        super().__init__(f"loss {term} diverged at epoch {epoch}: {value!r}")
        self.term = term
        self.epoch = epoch


@dataclass
class TrainConfig:
    epochs: int = 20
    batches_per_epoch: int = 500
    batch_size: int = 200
    lr_start: float = 1e-3
    lr_end: float = 1e-5
    w_y: float = 1.0
    w_z: float = 1.0
    w_x: float = 1.0
    w_pad: float = 1.0
    z_kernel: KernelSpec = field(default_factory=KernelSpec)
    x_kernel: KernelSpec = field(default_factory=KernelSpec)
    sigma_pad: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.lr_start >= self.lr_end > 0.0:
            raise ValueError("need lr_start >= lr_end > 0")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (MMD needs pairs)")
        if self.sigma_pad < 0.0:
            raise ValueError("sigma_pad must be >= 0")


@dataclass
class TrainHistory:
    loss_y: list = field(default_factory=list)
    loss_z: list = field(default_factory=list)
    loss_x: list = field(default_factory=list)
    loss_pad: list = field(default_factory=list)
    lr: list = field(default_factory=list)

    def append(self, ly, lz, lx, lpad, lr):
        self.loss_y.append(ly)
        self.loss_z.append(lz)
        self.loss_x.append(lx)
        self.loss_pad.append(lpad)
        self.lr.append(lr)

    def __len__(self):
        return len(self.loss_y)


def lr_at(config: TrainConfig, step: int, total: int) -> float:
    """Exponential interpolation from lr_start (step 0) to lr_end (step total)."""
    if not 0 <= step <= total or total < 1:
        raise ValueError(f"bad schedule position {step}/{total}")
    return config.lr_start * (config.lr_end / config.lr_start) ** (step / total)


def forward_losses(
    model: InnModel,
    x_batch: np.ndarray,
    y_sim: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
):
    """Forward-direction losses (observation fit, latent independence, pad).

    `x_batch` is unpadded (n, D); `y_sim` holds the aligned simulated
    observations. Returns three scalar Nodes.
    """
    n = x_batch.shape[0]
    if n < 2:
        raise ValueError("batch size must be >= 2")
    out = model.forward(Node(model.pad_x(x_batch)))

    loss_y = ad.mse(out.y, Node(y_sim))

    # Joint network output [y, z] against the product of marginals,
    # realized by permuting the simulated y rows and drawing fresh
    # latents. The gradient through the y columns is blocked.
    joint = ad.concat_cols([ad.stop_gradient(out.y), out.z])
    marginal = np.concatenate(
        [y_sim[rng.permutation(n)], rng.standard_normal((n, model.K))], axis=1
    )
    loss_z = mmd2(joint, marginal, config.z_kernel)

    if out.pad is not None:
        loss_pad = ad.mean_all(ad.square(out.pad))
    else:
        loss_pad = Node([[0.0]])
    return loss_y, loss_z, loss_pad


def backward_losses(
    model: InnModel,
    x_batch: np.ndarray,
    y_sim: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
):
    """Backward-direction losses (prior match, padding reconstruction)."""
    n = x_batch.shape[0]
    if n < 2:
        raise ValueError("batch size must be >= 2")

    target = model.assemble_output(
        y_sim[rng.permutation(n)], rng.standard_normal((n, model.K))
    )
    x_gen = model.inverse(Node(target))
    loss_x = mmd2(ad.cols(x_gen, 0, model.D), x_batch, config.x_kernel)

    if model.pad_out > 0:
        x_padded = Node(model.pad_x(x_batch))
        out = model.forward(x_padded)
        noise = Node(config.sigma_pad * rng.standard_normal((n, model.pad_out)))
        resampled = ad.concat_cols([out.y, out.z, noise])
        recon = model.inverse(resampled)
        loss_recon = ad.mse(recon, x_padded)
    else:
        loss_recon = Node([[0.0]])
    return loss_x, loss_recon


def _guard(epoch: int, **losses: Node) -> None:
    for term, node in losses.items():
        value = node.item()
        if not np.isfinite(value) or abs(value) > LOSS_CAP:
            raise TrainingDiverged(term, epoch, value)


def _weighted_total(pairs) -> Node | None:
    total = None
    for weight, loss in pairs:
        if weight == 0.0:
            continue
        term = ad.scale(loss, weight)
        total = term if total is None else ad.add(total, term)
    return total


def train(
    problem: ProblemSpec,
    model: InnModel,
    config: TrainConfig,
) -> TrainHistory:
    """Run the bidirectional loop; mutates `model`, returns per-epoch history.

    The training set (batches_per_epoch x batch_size prior draws plus their
    simulations) is generated once up front and reshuffled every epoch.
    Fully deterministic for a fixed config seed.
    """
    rng = np.random.default_rng(config.seed)
    history = TrainHistory()
    if config.epochs == 0:
        return history

    n_train = config.batches_per_epoch * config.batch_size
    x_train = problem.sample_prior(n_train, rng)
    y_train = problem.forward(x_train)

    params = model.params
    total_steps = config.epochs * config.batches_per_epoch
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n_train)
        sums = np.zeros(4)
        lr = config.lr_start
        for b in range(config.batches_per_epoch):
            idx = order[b * config.batch_size: (b + 1) * config.batch_size]
            xb, yb = x_train[idx], y_train[idx]

            loss_y, loss_z, loss_pad_out = forward_losses(model, xb, yb, config, rng)
            _guard(epoch, loss_y=loss_y, loss_z=loss_z, loss_pad=loss_pad_out)
            total_f = _weighted_total(
                [(config.w_y, loss_y), (config.w_z, loss_z), (config.w_pad, loss_pad_out)]
            )
            if total_f is not None:
                ad.backward(total_f)

            loss_x, loss_recon = backward_losses(model, xb, yb, config, rng)
            _guard(epoch, loss_x=loss_x, loss_pad=loss_recon)
            total_b = _weighted_total([(config.w_x, loss_x), (config.w_pad, loss_recon)])
            if total_b is not None:
                ad.backward(total_b)

            sums += [
                loss_y.item(),
                loss_z.item(),
                loss_x.item(),
                loss_pad_out.item() + loss_recon.item(),
            ]

            lr = lr_at(config, step, total_steps)
            ad.adam_step(params, lr)
            step += 1

        means = sums / config.batches_per_epoch
        history.append(*means, lr)
    return history
