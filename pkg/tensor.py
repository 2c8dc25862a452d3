"""Dense 2-D tensors with a dynamic reverse-mode tape.

Every op returns a new Tensor that remembers its parents and a closure that
pushes the upstream gradient back into them. Only rank-2 float64 arrays exist;
1-D sequences for the conv head are stored as (channels x length).
"""
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from errors import ConfigError, DataError, NumericError, ShapeError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        if self.grad is not None and self.grad.shape == self.data.shape:
            self.grad.fill(0.0)
        else:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self) -> None:
        """Backpropagate from a 1x1 tensor into every tensor on its tape."""
        if self.data.size != 1:
            raise ShapeError(f"backward() starts from a 1x1 loss, got {self.shape}")

        order = []
        seen = set()
        stack = [(self, False)]
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

        for node in order:
            if node._parents:
                node.grad = np.zeros_like(node.data)
            elif node.requires_grad and node.grad is None:
                node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)

        for node in reversed(order):
            if node._backward is not None and node.requires_grad:
                node._backward(node.grad)


def _checked(values: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NumericError(f"{op} produced a non-finite value")
    return values


def _result(values: np.ndarray, op: str, parents: Sequence[Tensor],
            backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(_checked(values, op))
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


# ---------------- elementwise and dense ops ----------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul {a.shape} @ {b.shape}")

    def backward(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _result(a.data @ b.data, "matmul", (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add {a.shape} + {b.shape}")

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.data + b.data, "add", (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul {a.shape} * {b.shape}")

    def backward(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _result(a.data * b.data, "mul", (a, b), backward)


def scale(x: Tensor, alpha: float) -> Tensor:
    alpha = float(alpha)

    def backward(g):
        _accumulate(x, alpha * g)

    return _result(alpha * x.data, "scale", (x,), backward)


def total(x: Tensor) -> Tensor:
    def backward(g):
        _accumulate(x, np.full_like(x.data, g[0, 0]))

    return _result(np.array([[x.data.sum()]]), "total", (x,), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g):
        _accumulate(x, g * mask)

    return _result(np.where(mask, x.data, 0.0), "relu", (x,), backward)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def backward(g):
        _accumulate(x, g * (1.0 - y * y))

    return _result(y, "tanh", (x,), backward)


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    return expit(z)


def sigmoid(x: Tensor) -> Tensor:
    y = _stable_sigmoid(x.data)

    def backward(g):
        _accumulate(x, g * y * (1.0 - y))

    return _result(y, "sigmoid", (x,), backward)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x (n x c) plus the row vector b (1 x c) on every row."""
    if b.rows != 1 or b.cols != x.cols:
        raise ShapeError(f"bias {b.shape} does not fit rows of {x.shape}")

    def backward(g):
        _accumulate(x, g)
        _accumulate(b, g.sum(axis=0, keepdims=True))

    return _result(x.data + b.data, "add_bias", (x, b), backward)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.rows != b.rows:
        raise ShapeError(f"concat_cols {a.shape} | {b.shape}")
    split = a.cols

    def backward(g):
        _accumulate(a, g[:, :split])
        _accumulate(b, g[:, split:])

    return _result(np.concatenate([a.data, b.data], axis=1), "concat_cols", (a, b), backward)


def reshape(x: Tensor, rows: int, cols: int) -> Tensor:
    """Row-major reshape, e.g. flattening a (k x c) matrix into a 1 x k*c sequence."""
    if rows * cols != x.data.size:
        raise ShapeError(f"cannot reshape {x.shape} to ({rows}, {cols})")
    shape = x.shape

    def backward(g):
        _accumulate(x, g.reshape(shape))

    return _result(x.data.reshape(rows, cols).copy(), "reshape", (x,), backward)


def take_rows(x: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.rows):
        raise ShapeError(f"row index out of range for {x.shape}")

    unique = np.unique(index).size == index.size

    def backward(g):
        full = np.zeros_like(x.data)
        if unique:
            full[index] = g
        else:
            np.add.at(full, index, g)
        _accumulate(x, full)

    return _result(x.data[index], "take_rows", (x,), backward)


def pad_rows(x: Tensor, rows: int) -> Tensor:
    """Append zero rows at the bottom until the tensor has `rows` rows."""
    if rows < x.rows:
        raise ShapeError(f"pad_rows cannot shrink {x.shape} to {rows} rows")
    n = x.rows
    out = np.zeros((rows, x.cols))
    out[:n] = x.data

    def backward(g):
        _accumulate(x, g[:n])

    return _result(out, "pad_rows", (x,), backward)


def sparse_matmul(m, x: Tensor) -> Tensor:
    """Constant scipy sparse matrix times a dense tensor; gradient is m^T @ g."""
    if m.shape[1] != x.rows:
        raise ShapeError(f"sparse {m.shape} @ {x.shape}")

    def backward(g):
        _accumulate(x, np.asarray(m.T @ g))

    return _result(np.asarray(m @ x.data), "sparse_matmul", (x,), backward)


# ---------------- regularisation and loss ----------------

def dropout(x: Tensor, p: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout. Eval mode hands back the very same tensor."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("training-mode dropout needs a seeded generator")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)

    def backward(g):
        _accumulate(x, g * keep)

    return _result(x.data * keep, "dropout", (x,), backward)


def bce_with_logits(logits: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy on raw logits, stable for any |z|."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if logits.cols != 1 or logits.rows != y.shape[0]:
        raise ShapeError(f"logits {logits.shape} vs {y.shape[0]} labels")
    if y.size == 0:
        raise DataError("bce_with_logits needs at least one label")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DataError("labels must be 0 or 1")
    z = logits.data
    n = z.shape[0]
    # softplus(z) - y*z  ==  max(z, 0) - y*z + log1p(exp(-|z|))
    per_item = np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))
    value = np.array([[per_item.mean()]])

    def backward(g):
        _accumulate(logits, g[0, 0] * (_stable_sigmoid(z) - y) / n)

    return _result(value, "bce_with_logits", (logits,), backward)


# ---------------- sequence ops for the conv head ----------------

def _out_len(length: int, width: int, stride: int) -> int:
    return (length - width) // stride + 1


def conv1d(x: Tensor, kernels: Tensor, width: int, stride: int = 1,
           bias: Optional[Tensor] = None) -> Tensor:
    """Valid cross-correlation of x (in_ch x L).

    kernels is stored flat as (out_ch x in_ch*width), channel-major, so the
    tensor stays 2-D. bias, when given, is (out_ch x 1).
    """
    in_ch, length = x.shape
    out_ch = kernels.rows
    if stride < 1 or width < 1:
        raise ShapeError(f"conv1d needs width, stride >= 1 (got {width}, {stride})")
    if kernels.cols != in_ch * width:
        raise ShapeError(f"kernels {kernels.shape} do not match {in_ch} channels x width {width}")
    if length < width:
        raise ShapeError(f"conv1d width {width} exceeds sequence length {length}")
    if bias is not None and bias.shape != (out_ch, 1):
        raise ShapeError(f"conv1d bias {bias.shape}, expected ({out_ch}, 1)")

    n_out = _out_len(length, width, stride)
    starts = np.arange(n_out) * stride
    # windows[c, t, w] = x[c, starts[t] + w]
    windows = sliding_window_view(x.data, width, axis=1)[:, starts, :]
    cols = windows.transpose(0, 2, 1).reshape(in_ch * width, n_out)
    out = kernels.data @ cols
    if bias is not None:
        out = out + bias.data

    def backward(g):
        _accumulate(kernels, g @ cols.T)
        if bias is not None:
            _accumulate(bias, g.sum(axis=1, keepdims=True))
        if x.requires_grad:
            dcols = (kernels.data.T @ g).reshape(in_ch, width, n_out)
            dx = np.zeros_like(x.data)
            # within one tap the positions starts + w are distinct
            for w in range(width):
                dx[:, starts + w] += dcols[:, w, :]
            _accumulate(x, dx)

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    return _result(out, "conv1d", parents, backward)


def maxpool1d(x: Tensor, window: int, stride: int) -> Tensor:
    """Windowed max per channel; the gradient goes to the first argmax."""
    channels, length = x.shape
    if window < 1 or stride < 1:
        raise ShapeError(f"maxpool1d needs window, stride >= 1 (got {window}, {stride})")
    if length < window:
        raise ShapeError(f"maxpool1d window {window} exceeds sequence length {length}")
    n_out = _out_len(length, window, stride)
    starts = np.arange(n_out) * stride
    windows = sliding_window_view(x.data, window, axis=1)[:, starts, :]
    arg = windows.argmax(axis=2)
    src = starts[None, :] + arg
    out = np.take_along_axis(x.data, src, axis=1)

    def backward(g):
        dx = np.zeros_like(x.data)
        rows = np.repeat(np.arange(channels), n_out)
        np.add.at(dx, (rows, src.ravel()), g.ravel())
        _accumulate(x, dx)

    return _result(out, "maxpool1d", (x,), backward)
