"""Invertible network: affine coupling blocks, fixed permutations, padding.

The forward map sends a padded input row [x | 0] to [y | z | pad]; the
inverse is exact by construction. Each block also reports its per-row
log-Jacobian (sum of the clamped scale outputs); permutations contribute
nothing. Graph-building (`Node`) and plain-numpy paths exist side by side:
training differentiates through both directions, sampling stays graph-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node, ShapeError, Subnet

LOG_2PI = math.log(2.0 * math.pi)


def clamp_scale_np(raw: np.ndarray, c: float) -> np.ndarray:
    """Soft-clamp scale outputs into (-c, c) via a scaled arctangent."""
    return c * (2.0 / math.pi) * np.arctan(raw / c)


def clamp_scale(raw: Node, c: float) -> Node:
    return ad.scale(ad.arctan(ad.scale(raw, 1.0 / c)), c * 2.0 / math.pi)


class CouplingBlock:
    """Two complementary affine coupling layers on a width-W row."""

    def __init__(
        self,
        width: int,
        hidden: int,
        depth: int,
        slope: float,
        clamp: float,
        rng: np.random.Generator,
        name: str = "block",
    ):
        if width < 2:
            raise ValueError("coupling needs width >= 2")
        if clamp <= 0.0:
            raise ValueError("clamp must be positive")
        self.width = width
        self.split = (width + 1) // 2
        self.clamp = float(clamp)
        w1, w2 = self.split, width - self.split
        self.s2 = Subnet(w2, w1, hidden, depth, slope, rng, f"{name}.s2", final_scale=0.1)
        self.t2 = Subnet(w2, w1, hidden, depth, slope, rng, f"{name}.t2", final_scale=0.1)
        self.s1 = Subnet(w1, w2, hidden, depth, slope, rng, f"{name}.s1", final_scale=0.1)
        self.t1 = Subnet(w1, w2, hidden, depth, slope, rng, f"{name}.t1", final_scale=0.1)

    @property
    def params(self):
        return self.s2.params + self.t2.params + self.s1.params + self.t1.params

    def forward(self, u: Node) -> tuple[Node, Node]:
        if u.shape[1] != self.width:
            raise ShapeError(f"coupling width {self.width}, got {u.shape[1]}")
        u1 = ad.cols(u, 0, self.split)
        u2 = ad.cols(u, self.split, self.width)
        s2 = clamp_scale(self.s2(u2), self.clamp)
        v1 = ad.add(ad.mul(u1, ad.exp(s2)), self.t2(u2))
        s1 = clamp_scale(self.s1(v1), self.clamp)
        v2 = ad.add(ad.mul(u2, ad.exp(s1)), self.t1(v1))
        logdet = ad.add(ad.sum_rows(s2), ad.sum_rows(s1))
        return ad.concat_cols([v1, v2]), logdet

    def forward_np(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u1, u2 = u[:, : self.split], u[:, self.split:]
        s2 = clamp_scale_np(self.s2.forward_np(u2), self.clamp)
        v1 = u1 * np.exp(s2) + self.t2.forward_np(u2)
        s1 = clamp_scale_np(self.s1.forward_np(v1), self.clamp)
        v2 = u2 * np.exp(s1) + self.t1.forward_np(v1)
        return np.concatenate([v1, v2], axis=1), s2.sum(axis=1) + s1.sum(axis=1)

    def inverse(self, v: Node) -> Node:
        """Tape-enabled inverse, used by the backward training pass."""
        if v.shape[1] != self.width:
            raise ShapeError(f"coupling width {self.width}, got {v.shape[1]}")
        v1 = ad.cols(v, 0, self.split)
        v2 = ad.cols(v, self.split, self.width)
        s1 = clamp_scale(self.s1(v1), self.clamp)
        u2 = ad.mul(ad.sub(v2, self.t1(v1)), ad.exp(ad.neg(s1)))
        s2 = clamp_scale(self.s2(u2), self.clamp)
        u1 = ad.mul(ad.sub(v1, self.t2(u2)), ad.exp(ad.neg(s2)))
        return ad.concat_cols([u1, u2])

    def inverse_np(self, v: np.ndarray) -> np.ndarray:
        v1, v2 = v[:, : self.split], v[:, self.split:]
        s1 = clamp_scale_np(self.s1.forward_np(v1), self.clamp)
        u2 = (v2 - self.t1.forward_np(v1)) * np.exp(-s1)
        s2 = clamp_scale_np(self.s2.forward_np(u2), self.clamp)
        u1 = (v1 - self.t2.forward_np(u2)) * np.exp(-s2)
        return np.concatenate([u1, u2], axis=1)


class PermutationLayer:
    """Fixed random shuffle of columns, drawn once from the model seed."""

    def __init__(self, width: int, rng: np.random.Generator):
        self.perm = rng.permutation(width)
        self.inverse_perm = np.empty_like(self.perm)
        self.inverse_perm[self.perm] = np.arange(width)

    @property
    def params(self):
        return []

    def forward(self, u: Node) -> tuple[Node, Node]:
        zero = Node(np.zeros((u.shape[0], 1)))
        return ad.permute_cols(u, self.perm), zero

    def forward_np(self, u: np.ndarray):
        return u[:, self.perm], np.zeros(u.shape[0])

    def inverse(self, v: Node) -> Node:
        return ad.permute_cols(v, self.inverse_perm)

    def inverse_np(self, v: np.ndarray) -> np.ndarray:
        return v[:, self.inverse_perm]


@dataclass
class FlowOutput:
    y: object
    z: object
    pad: object  # None when W == M + K
    logdet: object


@dataclass(frozen=True)
class ModelConfig:
    blocks: int = 3
    hidden: int = 64
    depth: int = 3
    slope: float = 0.01
    clamp: float = 2.0
    width: int | None = None  # nominal padded width; defaults to max(D, M+K)


class InnModel:
    """Stack of coupling blocks and fixed permutations on the padded space.

    Input layout: [x (D) | input padding (W-D)].
    Output layout: [y (M) | z (K) | output padding (W-M-K)].
    """

    def __init__(self, D: int, M: int, K: int, cfg: ModelConfig, seed: int):
        W = cfg.width if cfg.width is not None else max(D, M + K)
        if W < max(D, M + K):
            raise ValueError(f"width {W} < max(D, M+K) = {max(D, M + K)}")
        self.D, self.M, self.K, self.W = D, M, K, W
        self.cfg = cfg
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self.layers = []
        for i in range(cfg.blocks):
            if i > 0:
                self.layers.append(PermutationLayer(W, rng))
            self.layers.append(
                CouplingBlock(W, cfg.hidden, cfg.depth, cfg.slope, cfg.clamp, rng, f"block{i}")
            )

    @property
    def params(self):
        return [p for layer in self.layers for p in layer.params]

    @property
    def pad_in(self) -> int:
        return self.W - self.D

    @property
    def pad_out(self) -> int:
        return self.W - self.M - self.K

    def pad_x(self, x: np.ndarray) -> np.ndarray:
        """Append zero input-padding columns to a (n, D) batch."""
        if x.shape[1] != self.D:
            raise ShapeError(f"expected {self.D} x-columns, got {x.shape[1]}")
        if self.pad_in == 0:
            return np.asarray(x, dtype=np.float64)
        return np.concatenate([x, np.zeros((x.shape[0], self.pad_in))], axis=1)

    def _split(self, out, take):
        y = take(out, 0, self.M)
        z = take(out, self.M, self.M + self.K)
        pad = take(out, self.M + self.K, self.W) if self.pad_out else None
        return y, z, pad

    def forward(self, x_padded: Node) -> FlowOutput:
        if x_padded.shape[1] != self.W:
            raise ShapeError(f"expected padded width {self.W}, got {x_padded.shape[1]}")
        out = x_padded
        logdet = Node(np.zeros((x_padded.shape[0], 1)))
        for layer in self.layers:
            out, ld = layer.forward(out)
            logdet = ad.add(logdet, ld)
        y, z, pad = self._split(out, lambda n, a, b: ad.cols(n, a, b))
        return FlowOutput(y, z, pad, logdet)

    def forward_np(self, x_padded: np.ndarray) -> FlowOutput:
        out = np.asarray(x_padded, dtype=np.float64)
        if out.shape[1] != self.W:
            raise ShapeError(f"expected padded width {self.W}, got {out.shape[1]}")
        logdet = np.zeros(out.shape[0])
        for layer in self.layers:
            out, ld = layer.forward_np(out)
            logdet = logdet + ld
        y, z, pad = self._split(out, lambda m, a, b: m[:, a:b] if b > a else None)
        return FlowOutput(y, z, pad, logdet)

    def assemble_output(self, y: np.ndarray, z: np.ndarray, pad=None) -> np.ndarray:
        if y.shape[1] != self.M or z.shape[1] != self.K:
            raise ShapeError(f"expected widths M={self.M}, K={self.K}, got {y.shape[1]}, {z.shape[1]}")
        parts = [y, z]
        if self.pad_out:
            if pad is None:
                pad = np.zeros((y.shape[0], self.pad_out))
            elif pad.shape[1] != self.pad_out:
                raise ShapeError(f"expected pad width {self.pad_out}, got {pad.shape[1]}")
            parts.append(pad)
        return np.concatenate(parts, axis=1)

    def inverse(self, v: Node) -> Node:
        """Tape-enabled inverse on the full W-wide output."""
        out = v
        for layer in reversed(self.layers):
            out = layer.inverse(out)
        return out

    def inverse_np(self, y: np.ndarray, z: np.ndarray, pad=None) -> np.ndarray:
        """Map [y, z, pad] back through the network; returns the W-wide rows.

        Callers keep the first D columns as x.
        """
        out = self.assemble_output(y, z, pad)
        for layer in reversed(self.layers):
            out = layer.inverse_np(out)
        return out


def log_conditional_density(model: InnModel, x_padded: np.ndarray) -> np.ndarray:
    """Per-row log density of the flow's conditional model at x (Gaussian
    latent pushed through the inverse), evaluated via the forward pass.

    With nonzero output padding this is the density of the padded variable,
    not a marginal over pads; use it to rank samples, not as a likelihood.
    """
    out = model.forward_np(x_padded)
    z = out.z
    log_pz = -0.5 * np.einsum("ij,ij->i", z, z) - 0.5 * model.K * LOG_2PI
    return log_pz + out.logdet
