"""GCN, GraphSAGE and DGCNN built from the tape ops in tensor.py.

GCN and GraphSAGE score every node of one graph at once; DGCNN scores one
ego network per call and is what the node-to-graph reframing feeds.
"""
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional, Sequence

import numpy as np

from errors import ConfigError, DataError, NumericError, ShapeError
from sparse_graph import EgoSample, SparseGraph, extract_egos, mean_neighbor_aggregate, spmm
from tensor import (Tensor, add_bias, concat_cols, conv1d, dropout, matmul, maxpool1d,
                    pad_rows, relu, reshape, take_rows, tanh)

NODE_LAYERS = 3
DGCNN_GRAPH_LAYERS = 4
CONV1_CHANNELS = 16
POOL_WINDOW = 2
CONV2_CHANNELS = 32
CONV2_WIDTH = 5
DENSE_UNITS = 128


class Arch(IntEnum):
    GCN = 1
    SAGE = 2
    DGCNN = 3

    @property
    def tag(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, tag) -> "Arch":
        if isinstance(tag, Arch):
            return tag
        try:
            return cls[str(tag).strip().upper()]
        except KeyError:
            raise ConfigError(f"unknown model {tag!r}; pick one of gcn, sage, dgcnn") from None


@dataclass
class ModelParams:
    arch: Arch
    in_dim: int
    hidden_dim: int
    tensors: Dict[str, Tensor] = field(default_factory=dict)
    sortpool_k: int = 0

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def params(self) -> List[Tensor]:
        return list(self.tensors.values())

    def names(self) -> List[str]:
        return list(self.tensors.keys())

    def check_finite(self) -> None:
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t.data)):
                raise NumericError(f"parameter {name} holds a non-finite value")


@dataclass(frozen=True)
class DgcnnDims:
    embed: int        # columns of Z: input, four graph layers, root channel
    pooled: int       # sequence length after the max-pool
    conv2_width: int
    conv2_len: int

    @property
    def dense_in(self) -> int:
        return CONV2_CHANNELS * self.conv2_len


def dgcnn_dims(in_dim: int, hidden_dim: int, sortpool_k: int) -> DgcnnDims:
    if sortpool_k < POOL_WINDOW:
        raise ConfigError(f"sortpool_k must be >= {POOL_WINDOW}, got {sortpool_k}")
    pooled = (sortpool_k - POOL_WINDOW) // POOL_WINDOW + 1
    width = min(CONV2_WIDTH, pooled)
    return DgcnnDims(
        embed=in_dim + DGCNN_GRAPH_LAYERS * hidden_dim + 1,
        pooled=pooled,
        conv2_width=width,
        conv2_len=pooled - width + 1,
    )


def _glorot(rng: np.random.Generator, rows: int, cols: int, fan_in: int, fan_out: int, name: str) -> Tensor:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(rows, cols)), requires_grad=True, name=name)


def _zeros(rows: int, cols: int, name: str) -> Tensor:
    return Tensor(np.zeros((rows, cols)), requires_grad=True, name=name)


def init_params(arch, in_dim: int, hidden_dim: int, rng: np.random.Generator,
                sortpool_k: Optional[int] = None) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    arch = Arch.parse(arch)
    if in_dim < 1 or hidden_dim < 1:
        raise ConfigError(f"in_dim and hidden_dim must be >= 1 (got {in_dim}, {hidden_dim})")
    t: Dict[str, Tensor] = {}

    def dense(name, fan_in, fan_out):
        t[f"{name}.weight"] = _glorot(rng, fan_in, fan_out, fan_in, fan_out, f"{name}.weight")
        t[f"{name}.bias"] = _zeros(1, fan_out, f"{name}.bias")

    if arch in (Arch.GCN, Arch.SAGE):
        widen = 2 if arch == Arch.SAGE else 1
        dim = in_dim
        for i in range(1, NODE_LAYERS + 1):
            dense(f"{arch.tag}{i}", widen * dim, hidden_dim)
            dim = hidden_dim
        dense("head", hidden_dim, 1)
        return ModelParams(arch, in_dim, hidden_dim, t)

    if sortpool_k is None:
        raise ConfigError("dgcnn needs a concrete sortpool_k before its weights can be shaped")
    dims = dgcnn_dims(in_dim, hidden_dim, sortpool_k)
    dim = in_dim
    for i in range(1, DGCNN_GRAPH_LAYERS + 1):
        dense(f"graph{i}", dim, hidden_dim)
        dim = hidden_dim
    w1 = dims.embed
    t["conv1.weight"] = _glorot(rng, CONV1_CHANNELS, w1, w1, CONV1_CHANNELS * w1, "conv1.weight")
    t["conv1.bias"] = _zeros(CONV1_CHANNELS, 1, "conv1.bias")
    w2 = dims.conv2_width
    t["conv2.weight"] = _glorot(rng, CONV2_CHANNELS, CONV1_CHANNELS * w2,
                                CONV1_CHANNELS * w2, CONV2_CHANNELS * w2, "conv2.weight")
    t["conv2.bias"] = _zeros(CONV2_CHANNELS, 1, "conv2.bias")
    dense("dense", dims.dense_in, DENSE_UNITS)
    dense("head", DENSE_UNITS, 1)
    return ModelParams(Arch.DGCNN, in_dim, hidden_dim, t, sortpool_k=int(sortpool_k))


def _expect(p: ModelParams, arch: Arch, x: Tensor) -> None:
    if p.arch != arch:
        raise ShapeError(f"{arch.tag} forward got {p.arch.tag} parameters")
    if x.cols != p.in_dim:
        raise ShapeError(f"features have {x.cols} columns, model expects {p.in_dim}")


def gcn_forward(g_norm: SparseGraph, x: Tensor, p: ModelParams, training: bool = False,
                rng: Optional[np.random.Generator] = None, drop: float = 0.5) -> Tensor:
    """Three propagation layers and a linear head; one logit per node."""
    _expect(p, Arch.GCN, x)
    h = x
    for i in range(1, NODE_LAYERS + 1):
        h = relu(add_bias(matmul(spmm(g_norm, h), p[f"gcn{i}.weight"]), p[f"gcn{i}.bias"]))
        h = dropout(h, drop, training, rng)
    return add_bias(matmul(h, p["head.weight"]), p["head.bias"])


def sage_forward(g: SparseGraph, x: Tensor, p: ModelParams, training: bool = False,
                 rng: Optional[np.random.Generator] = None, drop: float = 0.5,
                 neighbor_cap: Optional[int] = None) -> Tensor:
    """Three mean-aggregator layers over [self | neighbor mean] and a linear head."""
    _expect(p, Arch.SAGE, x)
    h = x
    for i in range(1, NODE_LAYERS + 1):
        agg = mean_neighbor_aggregate(g, h, cap=neighbor_cap, rng=rng if training else None)
        h = relu(add_bias(matmul(concat_cols(h, agg), p[f"sage{i}.weight"]), p[f"sage{i}.bias"]))
        h = dropout(h, drop, training, rng)
    return add_bias(matmul(h, p["head.weight"]), p["head.bias"])


def sort_order(z: np.ndarray) -> np.ndarray:
    """Row order, descending, keyed on the last column, then the one before, and so on."""
    n, c = z.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    # lexsort treats its last key as primary, which is exactly the last column.
    # Trailing columns are added only while some neighbouring rows still tie.
    used = min(c, 2)
    while True:
        order = np.lexsort(z[:, c - used:].T)
        if used == c:
            break
        keys = z[order, c - used:]
        if not np.any(np.all(keys[1:] == keys[:-1], axis=1)):
            break
        used = min(c, 2 * used)
    return order[::-1]


def sort_pooling(z: Tensor, k: int) -> Tensor:
    if k < 1:
        raise ConfigError(f"sort pooling needs k >= 1, got {k}")
    top = sort_order(z.data)[:k]
    return pad_rows(take_rows(z, top), k)


def dgcnn_embeddings(sample: EgoSample, p: ModelParams) -> Tensor:
    """Z = [input | four tanh graph layers | root channel], one row per ego node.

    The root channel is the last column, so SortPooling always puts the root
    row first and the remaining rows follow the last graph layer's channels.
    """
    _expect(p, Arch.DGCNN, sample.features)
    adj = sample.norm_adj
    h = sample.features
    z = h
    for i in range(1, DGCNN_GRAPH_LAYERS + 1):
        h = tanh(add_bias(matmul(spmm(adj, h), p[f"graph{i}.weight"]), p[f"graph{i}.bias"]))
        z = concat_cols(z, h)
    return concat_cols(z, Tensor(root_channel(sample.n_nodes)))


def dgcnn_forward(sample: EgoSample, p: ModelParams, training: bool = False,
                  rng: Optional[np.random.Generator] = None, drop: float = 0.5) -> Tensor:
    """Graph-level logit (1 x 1) for one ego network."""
    dims = dgcnn_dims(p.in_dim, p.hidden_dim, p.sortpool_k)
    pooled = sort_pooling(dgcnn_embeddings(sample, p), p.sortpool_k)
    seq = reshape(pooled, 1, p.sortpool_k * dims.embed)
    c1 = relu(conv1d(seq, p["conv1.weight"], width=dims.embed, stride=dims.embed, bias=p["conv1.bias"]))
    c1 = maxpool1d(c1, POOL_WINDOW, POOL_WINDOW)
    c2 = relu(conv1d(c1, p["conv2.weight"], width=dims.conv2_width, stride=1, bias=p["conv2.bias"]))
    flat = reshape(c2, 1, dims.dense_in)
    hidden = relu(add_bias(matmul(flat, p["dense.weight"]), p["dense.bias"]))
    hidden = dropout(hidden, drop, training, rng)
    return add_bias(matmul(hidden, p["head.weight"]), p["head.bias"])


def root_channel(n: int) -> np.ndarray:
    marker = np.zeros((n, 1))
    if n:
        marker[0, 0] = 1.0
    return marker


def with_root_marker(features: np.ndarray) -> np.ndarray:
    return np.concatenate([features, root_channel(features.shape[0])], axis=1)


def node_to_graph_dataset(g: SparseGraph, features: np.ndarray, labels: np.ndarray,
                          nodes: Sequence[int], k: int = 3, workers: int = 1) -> List[EgoSample]:
    """One EgoSample per labeled node, ascending node order, root marker appended.

    `labels` holds one entry per graph node: 1 spreader, 0 regular, -1 unlabeled.
    """
    nodes = np.sort(np.asarray(list(nodes), dtype=np.int64))
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.shape[0] != g.n_nodes or labels.shape[0] != g.n_nodes:
        raise ShapeError("features and labels must cover every graph node")
    unlabeled = [int(v) for v in nodes if labels[v] not in (0, 1)]
    if unlabeled:
        raise DataError(f"node {unlabeled[0]} has no label; ego samples need labeled roots")
    egos = extract_egos(g, nodes, k, workers)
    return [
        EgoSample(
            graph=ego.graph,
            features=Tensor(with_root_marker(features[ego.nodes])),
            label=int(labels[root]),
            nodes=ego.nodes,
        )
        for root, ego in zip(nodes, egos)
    ]


def auto_sortpool_k(sizes: Sequence[int], quantile: float = 0.6, floor: int = POOL_WINDOW) -> int:
    """Ego size at the given quantile of the training split, never below `floor`."""
    ordered = sorted(int(s) for s in sizes)
    if not ordered:
        raise DataError("cannot size SortPooling from an empty training split")
    k = ordered[max(0, int(math.ceil(quantile * len(ordered))) - 1)]
    return max(floor, k)
