import networkx as nx
import pytest

from loopworks.errors import DisconnectedGraph, DomainError, TooLarge
from loopworks.fixtures import graph_fixtures
from loopworks.harness import compare, empirical
from loopworks.ust import (
    count_spanning_trees,
    enumerate_spanning_trees,
    grid_graph,
    is_spanning_tree,
    tree_probability,
    wilson_ust,
)

N = 10**5


def _uniform_check(g, root=None, ordering=None, seed=5, n=N):
    trees = enumerate_spanning_trees(g)
    exact = {t.edges: 1 / len(trees) for t in trees}
    emp = empirical(lambda r: wilson_ust(g, root, ordering, r).edges, n, seed)
    return compare(emp, exact, "chi-square"), compare(emp, exact, "TV", threshold=0.01), emp


def test_k3_uniform():
    chi, tv, emp = _uniform_check(nx.complete_graph(3))
    assert len(emp.counts) == 3 and chi.passed and tv.passed


def test_k4_uniform():
    chi, tv, emp = _uniform_check(nx.complete_graph(4), seed=6)
    assert len(emp.counts) == 16 and chi.passed and tv.passed


def test_path_graph_is_deterministic(rng):
    g = nx.path_graph(5)
    t = wilson_ust(g, 0, None, rng)
    assert t.edges == frozenset(frozenset(e) for e in g.edges)


@pytest.mark.parametrize("ordering", [[1, 2, 3], [3, 1, 2], [2, 3, 1]])
def test_ordering_invariance_k4(ordering):
    chi, tv, _ = _uniform_check(nx.complete_graph(4), 0, ordering, seed=7, n=40_000)
    assert chi.passed and tv.passed


def test_ordering_invariance_c4():
    g = nx.cycle_graph(4)
    for k, ordering in enumerate(([1, 2, 3], [3, 2, 1])):
        chi, tv, _ = _uniform_check(g, 0, ordering, seed=20 + k, n=40_000)
        assert chi.passed and tv.passed


def test_ordering_must_be_permutation(rng):
    with pytest.raises(DomainError):
        wilson_ust(nx.complete_graph(4), 0, [1, 2], rng)


def test_tree_probability_examples():
    assert tree_probability(nx.complete_graph(3)) == pytest.approx(1 / 3, abs=1e-12)
    assert tree_probability(nx.complete_graph(4)) == pytest.approx(1 / 16, abs=1e-12)


@pytest.mark.parametrize("name", sorted(graph_fixtures()))
def test_count_matches_enumeration(name):
    g = graph_fixtures()[name]
    n = count_spanning_trees(g)
    assert n == len(enumerate_spanning_trees(g))
    for root in g.nodes:
        assert count_spanning_trees(g, root) == n
    assert tree_probability(g) == pytest.approx(1 / n, rel=1e-12)


def test_count_closed_forms():
    for n in range(2, 9):
        assert count_spanning_trees(nx.complete_graph(n)) == n ** (n - 2)
    assert count_spanning_trees(nx.cycle_graph(4)) == 4
    assert count_spanning_trees(nx.path_graph(6)) == 1
    assert count_spanning_trees(grid_graph(3, 3)) == 192


@pytest.mark.parametrize("name", sorted(graph_fixtures()))
def test_wilson_output_is_spanning_tree(name, rng):
    g = graph_fixtures()[name]
    for _ in range(200):
        t = wilson_ust(g, None, None, rng)
        assert is_spanning_tree(g, [tuple(e) for e in t.edges])


def test_single_vertex(rng):
    g = nx.Graph()
    g.add_node("v")
    assert wilson_ust(g, None, None, rng).edges == frozenset()
    assert count_spanning_trees(g) == 1


def test_errors(rng):
    g = nx.Graph([(0, 1), (2, 3)])
    with pytest.raises(DisconnectedGraph):
        wilson_ust(g, None, None, rng)
    with pytest.raises(DisconnectedGraph):
        count_spanning_trees(g)
    with pytest.raises(DomainError):
        wilson_ust(nx.complete_graph(3), 9, None, rng)
    with pytest.raises(DomainError):
        wilson_ust(nx.complete_graph(3), 0, None, None)
    with pytest.raises(TooLarge):
        enumerate_spanning_trees(nx.complete_graph(9))


def test_determinism():
    g = nx.complete_graph(5)
    a = empirical(lambda r: wilson_ust(g, 0, None, r).edges, 2000, 99)
    b = empirical(lambda r: wilson_ust(g, 0, None, r).edges, 2000, 99)
    assert a.counts == b.counts
