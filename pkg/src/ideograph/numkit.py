"""Dense float64 matrices with taped reverse-mode gradients, plus Adam.

Every value is a 2-D array; scalars are (1, 1). Operations executed while a
Tape is active record a backward closure when any input needs a gradient.
Tape.backward walks the recorded ops in reverse creation order (a valid
reverse topological order) and accumulates gradients into leaf tensors.

The primitive set is deliberately closed: matrix multiply, row-broadcast bias
add, elementwise activations and Hadamard product, row softmax, column
concatenation, row gather / mean / pair-dot, scalar combinations, and squared
norm. Everything the encoder and the training objectives need is expressible
with these.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "NonFiniteError",
    "constant",
    "parameter",
    "scalar",
    "add_bias",
    "concat_cols",
    "row_pair_dot",
    "grad_check",
    "AdamState",
    "adam_state",
    "adam_step",
    "Adam",
]


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


_TAPES: list["Tape"] = []


def _active_tape():
    return _TAPES[-1] if _TAPES else None


class Tensor:
    """A (rows, cols) float64 value, optionally participating in a tape."""

    __slots__ = ("values", "requires_grad", "grad", "_vjp", "_recorded", "name")

    def __init__(self, values, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D; got shape {arr.shape}")
        self.values = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._vjp = None
        self._recorded = False
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"item() needs a (1, 1) tensor; got {self.shape}")
        return float(self.values[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def _needs(self) -> bool:
        return self.requires_grad or self._recorded

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    def __repr__(self):
        tag = self.name or "tensor"
        return f"<{tag} {self.shape[0]}x{self.shape[1]}>"

    # -- operator sugar -------------------------------------------------

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_const(self, float(other))

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return hadamard(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return add(self, scale(other, -1.0))
        return add_const(self, -float(other))

    def __rsub__(self, other):
        return add_const(scale(self, -1.0), float(other))

    # -- elementwise / reduction methods ---------------------------------

    def relu(self):
        return relu(self)

    def leaky_relu(self, alpha: float = 0.01):
        return leaky_relu(self, alpha)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def log(self):
        return tlog(self)

    def softmax_rows(self):
        return softmax_rows(self)

    def sum(self):
        return tsum(self)

    def sqnorm(self):
        return sqnorm(self)

    def gather_rows(self, idx):
        return gather_rows(self, idx)

    def mean_rows(self, idx):
        return mean_rows(self, idx)


def constant(values, name: str = "") -> Tensor:
    return Tensor(values, requires_grad=False, name=name)


def parameter(values, name: str = "") -> Tensor:
    return Tensor(values, requires_grad=True, name=name)


def scalar(x: float) -> Tensor:
    return Tensor(np.array([[float(x)]]))


class Tape:
    """Ordered record of primitive applications for one forward pass."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        assert _TAPES.pop() is self
        return False

    def __len__(self):
        return len(self.nodes)

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every requires_grad tensor's grad.

        Intermediate (recorded, non-leaf) gradients are released as soon as
        they have been propagated, so calling backward again re-accumulates
        cleanly onto the leaves.
        """
        if loss.shape != (1, 1):
            raise ShapeError(f"loss must be scalar (1, 1); got {loss.shape}")
        loss._accum(np.ones((1, 1)))
        for node in reversed(self.nodes):
            if node.grad is None or node._vjp is None:
                continue
            node._vjp(node.grad)
            if not node.requires_grad:
                node.grad = None


def _finish(values: np.ndarray, op: str, parents: tuple, vjp) -> Tensor:
    if not np.isfinite(values).all():
        raise NonFiniteError(f"{op} produced a non-finite value")
    out = Tensor(values)
    tape = _active_tape()
    if tape is not None and any(p._needs() for p in parents):
        out._vjp = vjp
        out._recorded = True
        tape.nodes.append(out)
    return out


# -- primitives -----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul mismatch: {a.shape} @ {b.shape}")
    v = a.values @ b.values

    def vjp(g):
        if a._needs():
            a._accum(g @ b.values.T)
        if b._needs():
            b._accum(a.values.T @ g)

    return _finish(v, "matmul", (a, b), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add mismatch: {a.shape} + {b.shape}")
    v = a.values + b.values

    def vjp(g):
        if a._needs():
            a._accum(g)
        if b._needs():
            b._accum(g)

    return _finish(v, "add", (a, b), vjp)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Row-broadcast bias: (n, d) + (1, d)."""
    if b.shape != (1, x.shape[1]):
        raise ShapeError(f"bias shape {b.shape} does not match {x.shape}")
    v = x.values + b.values

    def vjp(g):
        if x._needs():
            x._accum(g)
        if b._needs():
            b._accum(g.sum(axis=0, keepdims=True))

    return _finish(v, "add_bias", (x, b), vjp)


def add_const(a: Tensor, c: float) -> Tensor:
    v = a.values + c

    def vjp(g):
        if a._needs():
            a._accum(g)

    return _finish(v, "add_const", (a,), vjp)


def scale(a: Tensor, c: float) -> Tensor:
    v = a.values * c

    def vjp(g):
        if a._needs():
            a._accum(g * c)

    return _finish(v, "scale", (a,), vjp)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"hadamard mismatch: {a.shape} * {b.shape}")
    v = a.values * b.values

    def vjp(g):
        if a._needs():
            a._accum(g * b.values)
        if b._needs():
            b._accum(g * a.values)

    return _finish(v, "hadamard", (a, b), vjp)


def relu(a: Tensor) -> Tensor:
    v = np.maximum(a.values, 0.0)

    def vjp(g):
        if a._needs():
            a._accum(g * (a.values > 0.0))

    return _finish(v, "relu", (a,), vjp)


def leaky_relu(a: Tensor, alpha: float = 0.01) -> Tensor:
    v = np.where(a.values >= 0.0, a.values, alpha * a.values)

    def vjp(g):
        if a._needs():
            a._accum(g * np.where(a.values >= 0.0, 1.0, alpha))

    return _finish(v, "leaky_relu", (a,), vjp)


def tanh(a: Tensor) -> Tensor:
    v = np.tanh(a.values)

    def vjp(g):
        if a._needs():
            a._accum(g * (1.0 - v * v))

    return _finish(v, "tanh", (a,), vjp)


def sigmoid(a: Tensor) -> Tensor:
    x = a.values
    v = np.empty_like(x)
    pos = x >= 0
    v[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    v[~pos] = ex / (1.0 + ex)

    def vjp(g):
        if a._needs():
            a._accum(g * v * (1.0 - v))

    return _finish(v, "sigmoid", (a,), vjp)


def tlog(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.log(a.values)

    def vjp(g):
        if a._needs():
            a._accum(g / a.values)

    return _finish(v, "log", (a,), vjp)


def softmax_rows(a: Tensor) -> Tensor:
    z = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(z)
    v = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        if a._needs():
            inner = (g * v).sum(axis=1, keepdims=True)
            a._accum((g - inner) * v)

    return _finish(v, "softmax_rows", (a,), vjp)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols mismatch: {a.shape} | {b.shape}")
    v = np.concatenate([a.values, b.values], axis=1)
    da = a.shape[1]

    def vjp(g):
        if a._needs():
            a._accum(g[:, :da])
        if b._needs():
            b._accum(g[:, da:])

    return _finish(v, "concat_cols", (a, b), vjp)


def gather_rows(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("gather_rows index must be 1-D")
    v = a.values[idx]

    def vjp(g):
        if a._needs():
            buf = np.zeros_like(a.values)
            np.add.at(buf, idx, g)
            a._accum(buf)

    return _finish(v, "gather_rows", (a,), vjp)


def mean_rows(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("mean over an empty row-index set is undefined")
    v = a.values[idx].mean(axis=0, keepdims=True)
    k = idx.size

    def vjp(g):
        if a._needs():
            buf = np.zeros_like(a.values)
            np.add.at(buf, idx, np.repeat(g / k, k, axis=0))
            a._accum(buf)

    return _finish(v, "mean_rows", (a,), vjp)


def row_pair_dot(a: Tensor, b: Tensor) -> Tensor:
    """Dot product of corresponding rows: (n, d), (n, d) -> (n, 1)."""
    if a.shape != b.shape:
        raise ShapeError(f"row_pair_dot mismatch: {a.shape} vs {b.shape}")
    v = (a.values * b.values).sum(axis=1, keepdims=True)

    def vjp(g):
        if a._needs():
            a._accum(g * b.values)
        if b._needs():
            b._accum(g * a.values)

    return _finish(v, "row_pair_dot", (a, b), vjp)


def tsum(a: Tensor) -> Tensor:
    v = np.array([[a.values.sum()]])

    def vjp(g):
        if a._needs():
            a._accum(np.full_like(a.values, g[0, 0]))

    return _finish(v, "sum", (a,), vjp)


def sqnorm(a: Tensor) -> Tensor:
    v = np.array([[(a.values * a.values).sum()]])

    def vjp(g):
        if a._needs():
            a._accum(2.0 * g[0, 0] * a.values)

    return _finish(v, "sqnorm", (a,), vjp)


# -- gradient checking -----------------------------------------------------


def grad_check(fn, params, h: float = 1e-5) -> float:
    """Max relative error between taped gradients and central differences.

    `fn(params)` must return a scalar Tensor. The analytic pass runs once
    under a fresh tape; the numeric pass re-evaluates fn with each parameter
    coordinate nudged by +/-h (no tape active, values only). Relative error
    uses max(1, |analytic|, |numeric|) as denominator.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    params = list(params)
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = fn(params)
        tape.backward(loss)
    analytic = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.values)
        for p in params
    ]
    for p in params:
        p.zero_grad()

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.values.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            f_plus = fn(params).item()
            flat[i] = saved - h
            f_minus = fn(params).item()
            flat[i] = saved
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(1.0, abs(gflat[i]), abs(numeric))
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst


# -- Adam -------------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment accumulators and shared step counter."""

    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_state(params, beta1: float = 0.9, beta2: float = 0.999,
               eps: float = 1e-8) -> AdamState:
    params = list(params)
    return AdamState(
        m=[np.zeros_like(p.values) for p in params],
        v=[np.zeros_like(p.values) for p in params],
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(params, grads, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, applied to parameter values in place."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    params = list(params)
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.values)
        if g.shape != p.values.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.values.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.values -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


class Adam:
    """Convenience wrapper binding parameters, their grads, and AdamState."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.state = adam_state(self.params, beta1, beta2, eps)

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state, self.lr)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
