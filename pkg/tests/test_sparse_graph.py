from collections import deque

import numpy as np
import pytest

from errors import DataError, ShapeError
from helpers import random_graph
from sparse_graph import (SparseGraph, build_graph, extract_ego, extract_egos, mean_neighbor_aggregate,
                          sample_neighbors, spmm, sym_norm_adj)
from tensor import Tensor


def bfs_hops(a: np.ndarray, root: int, k: int):
    dist = {root: 0}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        if dist[v] == k:
            continue
        for u in np.flatnonzero(a[v]):
            if int(u) not in dist:
                dist[int(u)] = dist[v] + 1
                queue.append(int(u))
    return dist


def test_build_graph_symmetrises_and_dedups():
    g = build_graph([(0, 1), (1, 0), (1, 2), (1, 2), (2, 2)], 4)
    dense = g.to_dense()
    assert np.array_equal(dense, dense.T)
    assert g.n_edges == 2
    assert dense[2, 2] == 0.0
    assert g.degrees().tolist() == [1, 2, 1, 0]
    assert g.edge_pairs() == [(0, 1), (1, 2)]


def test_build_graph_names_the_bad_edge():
    with pytest.raises(DataError, match=r"\(1, 5\)"):
        build_graph([(0, 1), (1, 5)], 3)


def test_asymmetric_graph_is_rejected():
    with pytest.raises(ShapeError, match="symmetric"):
        SparseGraph(2, np.array([0, 1, 1]), np.array([1]), np.array([1.0]))


def test_unsorted_columns_are_rejected():
    with pytest.raises(ShapeError):
        SparseGraph(3, np.array([0, 2, 3, 4]), np.array([2, 1, 0, 0]), np.ones(4))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sym_norm_adj_matches_dense_formula(seed):
    g = random_graph(25, 0.15, seed)
    a = g.to_dense() + np.eye(25)
    d = np.diag(1.0 / np.sqrt(a.sum(axis=1)))
    assert np.allclose(sym_norm_adj(g).to_dense(), d @ a @ d, atol=1e-12, rtol=0)


def test_sym_norm_adj_isolated_node_keeps_self_loop():
    g = build_graph([(0, 1)], 3)
    assert sym_norm_adj(g).to_dense()[2, 2] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", [3, 4])
def test_spmm_matches_dense(seed):
    g = random_graph(30, 0.1, seed)
    x = np.random.default_rng(seed).normal(size=(30, 4))
    assert np.allclose(spmm(g, Tensor(x)).data, g.to_dense() @ x, atol=1e-12, rtol=0)


def test_spmm_row_mismatch():
    with pytest.raises(ShapeError):
        spmm(build_graph([(0, 1)], 2), Tensor(np.ones((3, 2))))


@pytest.mark.parametrize("seed", [5, 6, 7])
def test_mean_aggregate_matches_dense(seed):
    g = random_graph(20, 0.1, seed)
    x = np.random.default_rng(seed).normal(size=(20, 3))
    a = g.to_dense()
    want = np.zeros_like(x)
    for v in range(20):
        nbrs = np.flatnonzero(a[v])
        if nbrs.size:
            want[v] = x[nbrs].mean(axis=0)
    assert np.allclose(mean_neighbor_aggregate(g, Tensor(x)).data, want, atol=1e-12, rtol=0)


def test_sample_neighbors_caps_each_row():
    g = random_graph(30, 0.4, 11)
    op = sample_neighbors(g, 3, np.random.default_rng(0))
    counts = np.diff(op.indptr)
    assert np.all(counts == np.minimum(g.degrees(), 3))
    a = g.to_dense()
    rows, cols = op.nonzero()
    assert np.all(a[rows, cols] == 1.0)


def test_ego_on_path_graph():
    g = build_graph([(i, i + 1) for i in range(6)], 7)
    ego = extract_ego(g, 0, 3)
    assert ego.nodes.tolist() == [0, 1, 2, 3]
    assert ego.hops.tolist() == [0, 1, 2, 3]
    assert ego.graph.n_edges == 3


def test_ego_orders_by_hop_then_parent_id():
    g = build_graph([(4, 0), (4, 2), (0, 3), (2, 1)], 5)
    ego = extract_ego(g, 4, 2)
    assert ego.nodes.tolist() == [4, 0, 2, 1, 3]
    assert ego.hops.tolist() == [0, 1, 1, 2, 2]


def test_ego_of_isolated_node():
    g = build_graph([(0, 1)], 3)
    ego = extract_ego(g, 2, 3)
    assert ego.nodes.tolist() == [2]
    assert ego.graph.n_entries == 0


def test_ego_bad_root():
    with pytest.raises(DataError):
        extract_ego(build_graph([(0, 1)], 2), 2, 1)


@pytest.mark.parametrize("seed", range(50))
def test_ego_matches_bfs_oracle(seed):
    n = 10 + (37 * seed) % 91
    g = random_graph(n, 2.5 / n, seed)
    a = g.to_dense()
    rng = np.random.default_rng(seed)
    for root in rng.choice(n, size=4, replace=False):
        dist = bfs_hops(a, int(root), 3)
        ego = extract_ego(g, int(root), 3)
        want = sorted(dist, key=lambda v: (dist[v], v))
        assert ego.nodes.tolist() == want
        assert ego.hops.tolist() == [dist[v] for v in want]
        assert np.array_equal(ego.graph.to_dense(), a[np.ix_(want, want)])


@pytest.mark.parametrize("seed", [0, 1])
def test_ego_monotone_in_k(seed):
    g = random_graph(30, 0.08, seed)
    for k in range(4):
        small = set(extract_ego(g, 0, k).nodes.tolist())
        big = set(extract_ego(g, 0, k + 1).nodes.tolist())
        assert small <= big


def test_extract_egos_keeps_root_order_with_workers():
    g = random_graph(25, 0.1, 9)
    roots = [7, 3, 19, 0, 12]
    serial = extract_egos(g, roots, 2, workers=1)
    threaded = extract_egos(g, roots, 2, workers=3)
    assert [e.nodes[0] for e in threaded] == roots
    for a, b in zip(serial, threaded):
        assert np.array_equal(a.nodes, b.nodes)


def test_triangle_normalisation_and_spmm():
    g = build_graph([(0, 1), (1, 2), (0, 2)], 3)
    norm = sym_norm_adj(g)
    assert np.allclose(norm.to_dense(), np.full((3, 3), 1.0 / 3.0), atol=1e-15)
    assert np.allclose(spmm(norm, Tensor(np.ones((3, 1)))).data, 1.0, atol=1e-15)
    assert np.array_equal(spmm(g, Tensor(np.eye(3))).data, g.to_dense())


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_normalised_adjacency_has_spectral_radius_at_most_one(seed):
    dense = sym_norm_adj(random_graph(20, 0.2, seed)).to_dense()
    assert np.array_equal(dense, dense.T)
    assert np.max(np.abs(np.linalg.eigvalsh(dense))) <= 1.0 + 1e-12


def test_star_center_mean():
    g = build_graph([(0, 1), (0, 2), (0, 3)], 4)
    x = Tensor(np.array([[0.0], [1.0], [2.0], [3.0]]))
    assert mean_neighbor_aggregate(g, x).data[0, 0] == pytest.approx(2.0)


def test_empty_edge_list():
    g = build_graph([], 2)
    assert g.n_nodes == 2 and g.n_entries == 0


def test_ego_with_k_equal_n_is_the_component():
    g = build_graph([(0, 1), (1, 2), (3, 4)], 5)
    assert sorted(extract_ego(g, 1, 5).nodes.tolist()) == [0, 1, 2]
    assert extract_ego(g, 4, 5).nodes.tolist() == [4, 3]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ego_survives_relabeling_the_parent_graph(seed):
    g = random_graph(30, 0.1, seed)
    perm = np.random.default_rng(seed + 20).permutation(30)
    # node i of the relabeled graph is node perm[i] of g
    relabeled = SparseGraph.from_scipy(g.csr[perm][:, perm])
    inverse = np.argsort(perm)
    a = g.to_dense()
    for root in (0, 7, 19):
        ego = extract_ego(g, root, 3)
        other = extract_ego(relabeled, int(inverse[root]), 3)
        back = perm[other.nodes]
        assert back[0] == root
        assert sorted(back.tolist()) == sorted(ego.nodes.tolist())
        hop_of = dict(zip(ego.nodes.tolist(), ego.hops.tolist()))
        assert other.hops.tolist() == [hop_of[v] for v in back.tolist()]
        assert np.array_equal(other.graph.to_dense(), a[np.ix_(back, back)])
        assert other.graph.n_edges == ego.graph.n_edges
