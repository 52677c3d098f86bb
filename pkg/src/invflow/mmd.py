"""Kernel two-sample losses: squared MMD with heavy-tailed kernels.

The O(n^2) pairwise work lives in a compiled extension when available
(`invflow._mmdext`, built from Cython) with a numpy fallback; set
INVFLOW_MMD_BACKEND=numpy or =ext to force one. `benchmarks/bench_mmd.py`
compares the two.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _mmdnp
from .autodiff import Node, ShapeError

INVERSE_MULTIQUADRATIC = "inverse_multiquadratic"
MULTIQUADRATIC = "multiquadratic"

_KIND_CODES = {_mmdnp.KIND_IMQ: INVERSE_MULTIQUADRATIC, _mmdnp.KIND_MQ: MULTIQUADRATIC}
_KIND_IDS = {v: k for k, v in _KIND_CODES.items()}


def _pick_backend():
    forced = os.environ.get("INVFLOW_MMD_BACKEND", "")
    if forced == "numpy":
        return _mmdnp, "numpy"
    try:
        from . import _mmdext
    except ImportError:
        if forced == "ext":
            raise
        return _mmdnp, "numpy"
    return _mmdext, "ext"


_backend, BACKEND_NAME = _pick_backend()


@dataclass(frozen=True)
class KernelSpec:
    kind: str = INVERSE_MULTIQUADRATIC
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in _KIND_IDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not self.bandwidth > 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")

    @property
    def _code(self) -> int:
        return _KIND_IDS[self.kind]


def kernel_eval(spec: KernelSpec, a, b) -> float:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape or a.shape[0] != 1:
        raise ShapeError(f"kernel_eval expects two equal-width vectors, got {a.shape} vs {b.shape}")
    return float(_backend.kernel_matrix(a, b, spec.bandwidth, spec._code)[0, 0])


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ShapeError("kernel_matrix: widths differ")
    return _backend.kernel_matrix(a, b, spec.bandwidth, spec._code)


def mmd2(x, y, spec: KernelSpec) -> Node:
    """Biased (V-statistic) squared MMD between two sample sets.

    Accepts Nodes or plain arrays; returns a scalar Node differentiable
    w.r.t. whichever inputs are Nodes.
    """
    x_node = x if isinstance(x, Node) else None
    y_node = y if isinstance(y, Node) else None
    xa = np.ascontiguousarray(x.value if x_node is not None else x, dtype=np.float64)
    ya = np.ascontiguousarray(y.value if y_node is not None else y, dtype=np.float64)
    if xa.ndim != 2 or ya.ndim != 2 or xa.shape[1] != ya.shape[1]:
        raise ShapeError(f"mmd2: incompatible shapes {xa.shape} vs {ya.shape}")
    if xa.shape[0] < 1 or ya.shape[0] < 1:
        raise ShapeError("mmd2: empty sample set")

    value, gx, gy = _backend.mmd2_grads(xa, ya, spec.bandwidth, spec._code)

    parents = []
    grads = []
    if x_node is not None:
        parents.append(x_node)
        grads.append(gx)
    if y_node is not None:
        parents.append(y_node)
        grads.append(gy)
    if not parents:
        return Node([[value]])
    return Node(
        [[value]],
        tuple(parents),
        lambda g, _grads=tuple(grads): tuple(g[0, 0] * gr for gr in _grads),
    )
