"""Shared test utilities: finite differences and small random graphs."""
from typing import Callable

import numpy as np

from sparse_graph import SparseGraph, build_graph
from tensor import Tensor


def numeric_grad(loss_fn: Callable[[], Tensor], t: Tensor, eps: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar loss with respect to every entry of t."""
    grad = np.zeros_like(t.data)
    for idx in np.ndindex(*t.data.shape):
        old = t.data[idx]
        t.data[idx] = old + eps
        up = loss_fn().item()
        t.data[idx] = old - eps
        down = loss_fn().item()
        t.data[idx] = old
        grad[idx] = (up - down) / (2.0 * eps)
    return grad


def analytic_grad(loss_fn: Callable[[], Tensor], t: Tensor) -> np.ndarray:
    t.grad = None
    loss_fn().backward()
    return t.grad.copy()


def random_graph(n: int, p: float, seed: int) -> SparseGraph:
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < p
    return build_graph(np.stack([iu[keep], ju[keep]], axis=1), n)


def dense_neighbors(a: np.ndarray, v: int):
    return set(np.flatnonzero(a[v]).tolist())
