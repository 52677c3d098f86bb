"""Pure numpy backend for the pairwise-kernel computations.

Drop-in equivalent of the compiled `_mmdext` module; selected at import
time when the extension is unavailable (see `invflow.mmd`).
"""

from __future__ import annotations

import numpy as np

KIND_IMQ = 0
KIND_MQ = 1


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def kernel_matrix(a: np.ndarray, b: np.ndarray, h: float, kind: int) -> np.ndarray:
    r2 = _sq_dists(a, b) / (h * h)
    if kind == KIND_IMQ:
        return 1.0 / (1.0 + r2)
    return -np.sqrt(1.0 + r2)


def _kernel_and_slope(a, b, h, kind):
    """Kernel values plus d(kernel)/d(squared distance)."""
    h2 = h * h
    r2 = _sq_dists(a, b) / h2
    if kind == KIND_IMQ:
        k = 1.0 / (1.0 + r2)
        dk = -(k * k) / h2
    else:
        s = np.sqrt(1.0 + r2)
        k = -s
        dk = -0.5 / (h2 * s)
    return k, dk


def _grad_block(dk: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # sum_j dk[p, j] * 2 (a_p - b_j), vectorized over p
    return 2.0 * (dk.sum(axis=1)[:, None] * a - dk @ b)


def mmd2_grads(x: np.ndarray, y: np.ndarray, h: float, kind: int):
    """Biased V-statistic squared MMD and its gradients w.r.t. both inputs."""
    n, m = x.shape[0], y.shape[0]
    kxx, dxx = _kernel_and_slope(x, x, h, kind)
    kyy, dyy = _kernel_and_slope(y, y, h, kind)
    kxy, dxy = _kernel_and_slope(x, y, h, kind)
    value = kxx.mean() + kyy.mean() - 2.0 * kxy.mean()
    gx = (2.0 / (n * n)) * _grad_block(dxx, x, x) - (2.0 / (n * m)) * _grad_block(dxy, x, y)
    gy = (2.0 / (m * m)) * _grad_block(dyy, y, y) - (2.0 / (n * m)) * _grad_block(dxy.T, y, x)
    return value, gx, gy
