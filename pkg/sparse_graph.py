"""Immutable undirected graphs in CSR form, plus the message-passing primitives
the three models share: GCN propagation, mean aggregation and k-hop egos."""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from errors import DataError, ShapeError
from tensor import Tensor, sparse_matmul
from utils import fan_out


@dataclass(frozen=True, eq=False)
class SparseGraph:
    n_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    edge_values: np.ndarray

    def __post_init__(self):
        offsets = np.asarray(self.row_offsets, dtype=np.int64)
        cols = np.asarray(self.col_indices, dtype=np.int64)
        vals = np.asarray(self.edge_values, dtype=np.float64)
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "edge_values", vals)

        n = int(self.n_nodes)
        if n < 0:
            raise ShapeError(f"negative node count {n}")
        if offsets.shape != (n + 1,):
            raise ShapeError(f"row_offsets must have {n + 1} entries, got {offsets.shape[0]}")
        if offsets[0] != 0 or offsets[-1] != cols.shape[0] or np.any(np.diff(offsets) < 0):
            raise ShapeError("row_offsets must start at 0, never decrease and end at the entry count")
        if vals.shape != cols.shape:
            raise ShapeError(f"{vals.shape[0]} edge values for {cols.shape[0]} column indices")
        if cols.size and (cols.min() < 0 or cols.max() >= n):
            raise ShapeError("column index out of range")
        row_of = np.repeat(np.arange(n), np.diff(offsets))
        same_row = row_of[1:] == row_of[:-1]
        if np.any(np.diff(cols)[same_row] <= 0):
            raise ShapeError("column indices must be strictly increasing within each row")
        if (self.csr != self.csr.T).nnz:
            raise ShapeError("graph is not symmetric")

    @classmethod
    def from_scipy(cls, m) -> "SparseGraph":
        m = sp.csr_matrix(m, dtype=np.float64)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.indptr.copy(), m.indices.copy(), m.data.copy())

    @cached_property
    def csr(self) -> sp.csr_matrix:
        n = self.n_nodes
        return sp.csr_matrix((self.edge_values, self.col_indices, self.row_offsets), shape=(n, n))

    @cached_property
    def mean_operator(self) -> sp.csr_matrix:
        return _row_mean_operator(self.csr)

    @property
    def n_entries(self) -> int:
        return int(self.col_indices.shape[0])

    @property
    def n_edges(self) -> int:
        """Undirected edge count (a self-loop counts once)."""
        loops = int(np.count_nonzero(self.csr.diagonal()))
        return (self.n_entries - loops) // 2 + loops

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]

    def edge_pairs(self) -> List[Tuple[int, int]]:
        """Each undirected edge once, as (u, v) with u < v, in row order."""
        upper = sp.triu(self.csr, k=1, format="csr")
        rows = np.repeat(np.arange(self.n_nodes), np.diff(upper.indptr))
        return [(int(u), int(v)) for u, v in zip(rows, upper.indices)]

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()


def build_graph(edges: Iterable[Sequence[int]], n_nodes: int) -> SparseGraph:
    """Symmetrised, de-duplicated 0/1 graph. Self-loops in the input are dropped."""
    n = int(n_nodes)
    pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    bad = (pairs < 0) | (pairs >= n)
    if bad.any():
        u, v = pairs[np.argmax(bad.any(axis=1))]
        raise DataError(f"edge ({u}, {v}) references a node outside 0..{n - 1}")
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    m = sp.csr_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(n, n))
    m.sum_duplicates()
    m.data[:] = 1.0
    return SparseGraph.from_scipy(m)


def sym_norm_adj(g: SparseGraph) -> SparseGraph:
    """D^-1/2 (A + I) D^-1/2 with the degree counting the added self-loop."""
    a = g.csr + sp.identity(g.n_nodes, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    d_inv_sqrt = sp.diags(1.0 / np.sqrt(deg))
    return SparseGraph.from_scipy(d_inv_sqrt @ a @ d_inv_sqrt)


def spmm(g: SparseGraph, x: Tensor) -> Tensor:
    if x.rows != g.n_nodes:
        raise ShapeError(f"graph has {g.n_nodes} nodes but features have {x.rows} rows")
    return sparse_matmul(g.csr, x)


def _row_mean_operator(a: sp.csr_matrix) -> sp.csr_matrix:
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return sp.diags(inv) @ a


def sample_neighbors(g: SparseGraph, cap: int, rng: np.random.Generator) -> sp.csr_matrix:
    """Row-wise subsample: every node keeps at most `cap` of its neighbors.

    The result is a directed 0/1 operator (row v lists who v listens to), so
    it is returned as a plain scipy matrix rather than a SparseGraph.
    """
    if cap < 1:
        raise ShapeError(f"neighbor cap must be >= 1, got {cap}")
    rows, cols = [], []
    for v in range(g.n_nodes):
        nbrs = g.neighbors(v)
        if nbrs.shape[0] > cap:
            nbrs = np.sort(rng.choice(nbrs, size=cap, replace=False))
        rows.append(np.full(nbrs.shape[0], v))
        cols.append(nbrs)
    r = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    n = g.n_nodes
    return sp.csr_matrix((np.ones(r.shape[0]), (r, c)), shape=(n, n))


def mean_neighbor_aggregate(g: SparseGraph, x: Tensor, cap: Optional[int] = None,
                            rng: Optional[np.random.Generator] = None) -> Tensor:
    """Row v = mean of x over v's neighbors; isolated nodes get a zero row."""
    if x.rows != g.n_nodes:
        raise ShapeError(f"graph has {g.n_nodes} nodes but features have {x.rows} rows")
    if cap is not None and rng is not None:
        op = _row_mean_operator(sample_neighbors(g, cap, rng))
    else:
        op = g.mean_operator
    return sparse_matmul(op, x)


# ---------------- ego networks ----------------

@dataclass(frozen=True, eq=False)
class EgoNetwork:
    nodes: np.ndarray      # parent ids; nodes[0] is the root
    hops: np.ndarray       # BFS distance of each node from the root
    graph: SparseGraph     # induced subgraph in local numbering


def extract_ego(g: SparseGraph, root: int, k: int = 3) -> EgoNetwork:
    """Induced k-hop ego network, renumbered by (BFS distance, parent id)."""
    root = int(root)
    if not 0 <= root < g.n_nodes:
        raise DataError(f"root {root} outside 0..{g.n_nodes - 1}")
    if k < 0:
        raise DataError(f"hop count must be >= 0, got {k}")
    dist = dijkstra(g.csr, directed=True, indices=root, unweighted=True, limit=k + 0.5)
    members = np.flatnonzero(np.isfinite(dist) & (dist <= k))
    hops = dist[members].astype(np.int64)
    order = np.lexsort((members, hops))
    nodes = members[order]
    hops = hops[order]
    sub = g.csr[nodes][:, nodes]
    return EgoNetwork(nodes=nodes, hops=hops, graph=SparseGraph.from_scipy(sub))


def extract_egos(g: SparseGraph, roots: Sequence[int], k: int = 3, workers: int = 1) -> List[EgoNetwork]:
    return fan_out(lambda r: extract_ego(g, r, k), list(roots), workers)


@dataclass(frozen=True, eq=False)
class EgoSample:
    graph: SparseGraph
    features: Tensor
    label: int
    nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    root_local_index: int = 0

    def __post_init__(self):
        if self.root_local_index != 0:
            raise DataError("the ego root is always local node 0")
        if self.features.rows != self.graph.n_nodes:
            raise ShapeError(f"{self.features.rows} feature rows for a {self.graph.n_nodes}-node ego")
        if int(self.label) not in (0, 1):
            raise DataError(f"ego label must be 0 or 1, got {self.label}")

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    @cached_property
    def norm_adj(self) -> SparseGraph:
        return sym_norm_adj(self.graph)
