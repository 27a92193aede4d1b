import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdfu.topology import (EdgeListParseError, GenerationFailure, Graph, InvalidParameters,
                           NotAnEdge, TopologyError, _index_to_pair, complete_graph, generate_er,
                           is_connected, load_edge_list, pair_degree, save_edge_list)

from conftest import random_connected_graph


def test_two_node_er_is_single_edge():
    for seed in (0, 1, 99):
        assert generate_er(2, 1, seed).edges == ((0, 1),)


def test_er_max_edges_is_complete():
    assert generate_er(4, 6, 5) == complete_graph(4)


def test_er_thousand_node_scale():
    g = generate_er(1000, 5000, 11)
    assert g.n == 1000 and g.m == 5000
    assert g.degrees.mean() == pytest.approx(10.0)
    assert is_connected(g.n, g.edges)


@pytest.mark.parametrize("n,m", [(5, 3), (5, 11), (1, 0), (3, 4)])
def test_er_rejects_bad_parameters(n, m):
    with pytest.raises(InvalidParameters):
        generate_er(n, m, 0)


def test_er_gives_up_after_cap():
    # A random 29-edge subset of K_30 is almost never a spanning tree.
    with pytest.raises(GenerationFailure):
        generate_er(30, 29, 0, max_attempts=5)


def test_er_reproducible_and_seed_sensitive():
    a, b, c = generate_er(60, 200, 7), generate_er(60, 200, 7), generate_er(60, 200, 8)
    assert a.edges == b.edges
    assert a.edges != c.edges


def test_pair_index_decoding_enumerates_upper_triangle():
    n = 7
    i, j = _index_to_pair(np.arange(n * (n - 1) // 2), n)
    expected = [(a, b) for a in range(n) for b in range(a + 1, n)]
    assert list(zip(i.tolist(), j.tolist())) == expected


def test_pair_degree_examples(path3, k4, star5):
    assert pair_degree(path3, 0, 1) == 2
    assert all(pair_degree(k4, i, j) == 3 for i, j in k4.edges)
    assert pair_degree(star5, 0, 3) == 5


def test_pair_degree_needs_edge(path3):
    with pytest.raises(NotAnEdge):
        pair_degree(path3, 0, 2)


def test_load_examples():
    assert load_edge_list("0 1\n1 2\n") == Graph(3, ((0, 1), (1, 2)))
    assert load_edge_list("# comment\n0 1\n").edges == ((0, 1),)


@pytest.mark.parametrize("text,needle", [
    ("0 0\n", "self-loop"),
    ("0 1\n1 0\n", "duplicate"),
    ("0 1\n1 x\n", "line 2"),
    ("0 1 2\n", "line 1"),
    ("0 1\n2 3\n", "not connected"),
    ("", "no edges"),
])
def test_load_rejects(text, needle):
    with pytest.raises(EdgeListParseError, match=needle):
        load_edge_list(text)


def test_load_remaps_sparse_ids():
    g = load_edge_list("10 30\n30 7\n")
    assert g.n == 3
    assert g.labels == (7, 10, 30)
    assert g.edges == ((0, 2), (1, 2))


def test_load_accepts_file_objects():
    g = load_edge_list(io.StringIO("0 1\n"))
    assert g.m == 1


def test_graph_invariants_enforced():
    with pytest.raises(TopologyError):
        Graph(3, ((0, 1),))
    with pytest.raises(TopologyError):
        Graph(2, ((0, 1), (1, 0)))


def test_directed_edges_sorted(path3):
    src, dst = path3.directed_edges()
    assert list(zip(src.tolist(), dst.tolist())) == [(0, 1), (1, 0), (1, 2), (2, 1)]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1))
def test_graph_properties(n, seed):
    g = random_connected_graph(np.random.default_rng(seed), n)
    assert int(g.degrees.sum()) == 2 * g.m
    assert is_connected(g.n, g.edges)
    for i, j in g.edges:
        assert pair_degree(g, i, j) == pair_degree(g, j, i)
    assert load_edge_list(save_edge_list(g)) == g


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2**32 - 1))
def test_er_always_connected_with_exact_size(n, seed):
    total = n * (n - 1) // 2
    m = min(total, 2 * n)
    g = generate_er(n, m, seed)
    assert g.m == m and g.n == n
    assert is_connected(g.n, g.edges)
