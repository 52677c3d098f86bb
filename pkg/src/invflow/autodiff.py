"""Reverse-mode automatic differentiation over dense 2-D float64 arrays.

Just enough machinery to train the coupling-block flow: a Node graph built
by the primitive functions below, a topological-order backward sweep, and
an Adam optimizer over Parameter leaves. Everything is batched: vectors are
rows of a (batch, width) matrix.
"""

from __future__ import annotations

import math

import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(ArithmeticError):
    pass


def _check_finite(value: np.ndarray, where: str) -> None:
    # Fast path: a finite sum implies all entries finite (NaN/Inf propagate
    # through the sum); fall back to the exact check only on suspicion.
    if not math.isfinite(float(value.sum())) and not np.all(np.isfinite(value)):
        raise NonFiniteError(f"non-finite values produced by {where}")


def _as_matrix(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"expected at most 2 dimensions, got shape {arr.shape}")
    return arr


class Node:
    """One value in the computation graph.

    `_backward(grad)` returns the gradient contribution for each parent,
    aligned with `_parents`. Leaves (constants, Parameters) have neither.
    """

    __slots__ = ("value", "grad", "_parents", "_backward", "_grad_owned")

    def __init__(self, value, parents=(), backward=None, check=True):
        self.value = _as_matrix(value)
        if check:
            _check_finite(self.value, type(self).__name__)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Node, ...] = tuple(parents)
        self._backward = backward
        self._grad_owned = False

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() on non-scalar node of shape {self.shape}")
        return float(self.value[0, 0])


class Parameter(Node):
    """Trainable leaf with a persistent gradient accumulator and Adam state."""

    __slots__ = ("name", "m", "v", "t")

    def __init__(self, value, name: str = ""):
        super().__init__(value)
        self.name = name
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.t = 0


def constant(value) -> Node:
    return Node(value)


def _binary_shapes(a: Node, b: Node, op: str) -> None:
    if a.shape != b.shape and not (b.shape[0] == 1 and a.shape[1] == b.shape[1]):
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not conform")


def _reduce_to(grad: np.ndarray, shape) -> np.ndarray:
    # Undo row broadcasting: a (1, w) operand collects the column sums.
    if shape[0] == 1 and grad.shape[0] != 1:
        return grad.sum(axis=0, keepdims=True)
    return grad


def add(a: Node, b: Node) -> Node:
    _binary_shapes(a, b, "add")
    return Node(
        a.value + b.value,
        (a, b),
        lambda g: (g, _reduce_to(g, b.shape)),
    )


def sub(a: Node, b: Node) -> Node:
    _binary_shapes(a, b, "sub")
    return Node(
        a.value - b.value,
        (a, b),
        lambda g: (g, -_reduce_to(g, b.shape)),
    )


def mul(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    return Node(a.value * b.value, (a, b), lambda g: (g * b.value, g * a.value))


def matmul(a: Node, b: Node) -> Node:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims {a.shape} x {b.shape} do not match")
    return Node(
        a.value @ b.value,
        (a, b),
        lambda g: (g @ b.value.T, a.value.T @ g),
    )


def scale(a: Node, k: float) -> Node:
    k = float(k)
    return Node(a.value * k, (a,), lambda g: (g * k,))


def neg(a: Node) -> Node:
    return scale(a, -1.0)


def exp(a: Node) -> Node:
    out = np.exp(a.value)
    _check_finite(out, "exp")
    return Node(out, (a,), lambda g: (g * out,))


def square(a: Node) -> Node:
    return Node(a.value * a.value, (a,), lambda g: (g * (2.0 * a.value),))


def arctan(a: Node) -> Node:
    return Node(
        np.arctan(a.value),
        (a,),
        lambda g: (g / (1.0 + a.value * a.value),),
    )


def _leaky_factor(value: np.ndarray, slope: float) -> np.ndarray:
    # slope + (1 - slope) * [value > 0], cheaper than np.where on one core
    factor = (value > 0.0).astype(np.float64)
    if slope != 0.0:
        factor *= 1.0 - slope
        factor += slope
    return factor


def leaky_relu(a: Node, slope: float) -> Node:
    slope = float(slope)
    if not 0.0 <= slope < 1.0:
        raise ValueError(f"leaky slope must lie in [0, 1), got {slope}")
    factor = _leaky_factor(a.value, slope)
    return Node(a.value * factor, (a,), lambda g: (g * factor,))


def affine(x: Node, w: Node, b: Node, slope: float | None = None) -> Node:
    """Fused x @ w + b, optionally followed by a leaky rectifier.

    One graph node instead of three keeps the per-batch Python overhead of
    the training loop tolerable; gradients equal the composed primitives'.
    """
    if x.shape[1] != w.shape[0] or b.shape != (1, w.shape[1]):
        raise ShapeError(f"affine: shapes {x.shape}, {w.shape}, {b.shape} do not conform")
    pre = x.value @ w.value
    pre += b.value
    if slope is None:
        def backward_fn(g):
            return g @ w.value.T, x.value.T @ g, g.sum(axis=0, keepdims=True)
        return Node(pre, (x, w, b), backward_fn)
    if not 0.0 <= slope < 1.0:
        raise ValueError(f"leaky slope must lie in [0, 1), got {slope}")
    factor = _leaky_factor(pre, slope)

    def backward_act(g):
        gp = g * factor
        return gp @ w.value.T, x.value.T @ gp, gp.sum(axis=0, keepdims=True)

    return Node(pre * factor, (x, w, b), backward_act)


def cols(a: Node, start: int, stop: int) -> Node:
    if not 0 <= start <= stop <= a.shape[1]:
        raise ShapeError(f"cols [{start}:{stop}] out of range for width {a.shape[1]}")

    def backward(g):
        full = np.zeros_like(a.value)
        full[:, start:stop] = g
        return (full,)

    return Node(a.value[:, start:stop], (a,), backward)


def concat_cols(parts: list[Node]) -> Node:
    if not parts:
        raise ShapeError("concat_cols of zero parts")
    rows = parts[0].shape[0]
    if any(p.shape[0] != rows for p in parts):
        raise ShapeError("concat_cols: row counts differ")
    widths = [p.shape[1] for p in parts]
    offsets = np.concatenate([[0], np.cumsum(widths)])

    def backward(g):
        return tuple(g[:, offsets[i]: offsets[i + 1]] for i in range(len(parts)))

    return Node(np.concatenate([p.value for p in parts], axis=1), tuple(parts), backward)


def permute_cols(a: Node, perm: np.ndarray) -> Node:
    perm = np.asarray(perm, dtype=np.intp)
    if perm.shape != (a.shape[1],):
        raise ShapeError("permutation length does not match width")
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return Node(a.value[:, perm], (a,), lambda g: (g[:, inv],))


def sum_all(a: Node) -> Node:
    return Node(
        np.array([[a.value.sum()]]),
        (a,),
        lambda g: (np.full_like(a.value, g[0, 0]),),
    )


def mean_all(a: Node) -> Node:
    inv_n = 1.0 / a.value.size
    return Node(
        np.array([[a.value.mean()]]),
        (a,),
        lambda g: (np.full_like(a.value, g[0, 0] * inv_n),),
    )


def sum_rows(a: Node) -> Node:
    """Per-row sum over columns, shape (n, 1)."""
    return Node(
        a.value.sum(axis=1, keepdims=True),
        (a,),
        lambda g: (np.broadcast_to(g, a.shape).copy(),),
    )


def stop_gradient(a: Node) -> Node:
    return Node(a.value.copy())


def mse(a: Node, b: Node) -> Node:
    return mean_all(square(sub(a, b)))


def identity(a: Node) -> Node:
    return Node(a.value.copy(), (a,), lambda g: (g,))


def _topo_order(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(output: Node) -> None:
    """Accumulate d(output)/d(leaf) into every reachable node's grad.

    Parameter grads are added to, never reset, so forward- and backward-pass
    losses can pool their gradients before a single optimizer step.
    """
    if output.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar output, got shape {output.shape}")
    order = _topo_order(output)
    for node in order:
        if not isinstance(node, Parameter):
            node.grad = None
            node._grad_owned = False
    if isinstance(output, Parameter):
        output.grad[0, 0] += 1.0
    else:
        output.grad = np.ones((1, 1))
        output._grad_owned = True
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        contribs = node._backward(node.grad)
        for parent, contrib in zip(node._parents, contribs):
            if isinstance(parent, Parameter):
                parent.grad += contrib
            elif parent.grad is None:
                # First contribution: adopt the array without copying. It may
                # alias an upstream grad, so mutate it only once owned.
                parent.grad = contrib
            elif parent._grad_owned:
                parent.grad += contrib
            else:
                parent.grad = parent.grad + contrib
                parent._grad_owned = True
    for node in order:
        if isinstance(node, Parameter):
            _check_finite(node.grad, "backward")
        elif node.grad is None:
            node.grad = np.zeros_like(node.value)


def zero_grads(params: list[Parameter]) -> None:
    for p in params:
        p.grad[:] = 0.0


def adam_step(
    params: list[Parameter],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update from the accumulated grads; resets the accumulators."""
    if lr <= 0.0:
        raise ValueError(f"lr must be positive, got {lr}")
    for p in params:
        p.t += 1
        p.m += (1.0 - beta1) * (p.grad - p.m)
        p.v += (1.0 - beta2) * (p.grad * p.grad - p.v)
        m_hat = p.m / (1.0 - beta1 ** p.t)
        v_hat = p.v / (1.0 - beta2 ** p.t)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        _check_finite(p.value, f"adam_step({p.name})")
        p.grad[:] = 0.0


class Subnet:
    """Fully connected stack with leaky-rectifier activations.

    The last layer is affine with no activation. `depth` counts the affine
    layers; intermediate widths are all `hidden`.
    """

    def __init__(
        self,
        in_width: int,
        out_width: int,
        hidden: int,
        depth: int,
        slope: float,
        rng: np.random.Generator,
        name: str = "net",
        final_scale: float = 1.0,
    ):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        self.slope = float(slope)
        widths = [in_width] + [hidden] * (depth - 1) + [out_width]
        self.layers: list[tuple[Parameter, Parameter]] = []
        last = depth - 1
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            if i == last:
                # Near-identity start: keeps deep stacks numerically exact
                # to invert regardless of the clamp constant.
                bound *= final_scale
            w = Parameter(
                rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                name=f"{name}.w{i}",
            )
            b = Parameter(np.zeros((1, fan_out)), name=f"{name}.b{i}")
            self.layers.append((w, b))

    @property
    def params(self) -> list[Parameter]:
        return [p for pair in self.layers for p in pair]

    def __call__(self, x: Node) -> Node:
        out = x
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            out = affine(out, w, b, self.slope if i < last else None)
        return out

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        """Graph-free evaluation, for sampling and oracle re-checks."""
        out = x
        for i, (w, b) in enumerate(self.layers):
            out = out @ w.value + b.value
            if i < len(self.layers) - 1:
                out *= _leaky_factor(out, self.slope)
        return out
