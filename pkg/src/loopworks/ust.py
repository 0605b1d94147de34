"""Uniform spanning trees: Wilson's algorithm and matrix-tree counting.

Graphs are simple undirected :class:`networkx.Graph` objects.  The walk on a
graph is simple random walk with the root as its only boundary vertex.
"""

import warnings
from dataclasses import dataclass
from itertools import combinations

import networkx as nx
import numpy as np

from .chain import build_chain
from .errors import DisconnectedGraph, DomainError, NonIntegerResult, TooLarge
from .linops import greens_bundle
from .paths import loop_erase

MAX_ENUMERATION_VERTICES = 8
FLOAT_WARNING_VERTICES = 30


@dataclass(frozen=True)
class SpanningTree:
    edges: frozenset
    root: object

    def sorted_edges(self, rank=None):
        key = (lambda s: s) if rank is None else rank.__getitem__
        pairs = [tuple(sorted(e, key=key)) for e in self.edges]
        return sorted(pairs, key=lambda e: (key(e[0]), key(e[1])))


def _check_graph(graph):
    if graph.number_of_nodes() == 0:
        raise DomainError("empty graph")
    if graph.is_directed() or graph.is_multigraph():
        raise DomainError("graph must be simple and undirected")
    if nx.number_of_selfloops(graph):
        raise DomainError("graph must not have self-loops")
    if not nx.is_connected(graph):
        raise DisconnectedGraph("graph is not connected")


def _root(graph, root):
    if root is None:
        return next(iter(graph.nodes))
    if root not in graph:
        raise DomainError(f"root {root!r} is not a vertex")
    return root


def is_spanning_tree(graph, edges):
    edges = [tuple(e) for e in edges]
    if len(edges) != graph.number_of_nodes() - 1:
        return False
    if any(not graph.has_edge(u, v) for u, v in edges):
        return False
    tree = nx.Graph()
    tree.add_nodes_from(graph.nodes)
    tree.add_edges_from(edges)
    return nx.is_tree(tree)


def graph_chain(graph, root=None):
    """Simple random walk on ``graph`` stopped at ``root``."""
    _check_graph(graph)
    root = _root(graph, root)
    weights = {}
    for x in graph.nodes:
        if x == root:
            weights[(x, x)] = 1.0
            continue
        deg = graph.degree(x)
        for y in graph.neighbors(x):
            weights[(x, y)] = 1.0 / deg
    return build_chain(list(graph.nodes), [root], weights)


def wilson_ust(graph, root=None, ordering=None, rng=None):
    """Sample a uniform spanning tree with Wilson's algorithm.

    Starting from the tree ``{root}``, a walk is launched from the first
    vertex of ``ordering`` not yet covered, stopped on hitting the tree, loop
    erased, and its edges added; repeat until every vertex is covered.
    """
    if rng is None:
        raise DomainError("an explicit generator is required")
    _check_graph(graph)
    root = _root(graph, root)
    others = [v for v in graph.nodes if v != root]
    if ordering is None:
        ordering = others
    elif len(ordering) != len(others) or set(ordering) != set(others):
        raise DomainError("ordering must be a permutation of the non-root vertices")
    nbrs = {v: list(graph.neighbors(v)) for v in graph.nodes}
    in_tree = {root}
    edges = set()
    rand = rng.random
    for start in ordering:
        if start in in_tree:
            continue
        walk = [start]
        v = start
        while v not in in_tree:
            nb = nbrs[v]
            v = nb[int(rand() * len(nb))]
            walk.append(v)
        eta = loop_erase(walk)
        for a, b in zip(eta, eta[1:]):
            edges.add(frozenset((a, b)))
        in_tree.update(eta)
    return SpanningTree(frozenset(edges), root)


def tree_probability(graph, root=None):
    """Probability that Wilson's algorithm returns any given spanning tree."""
    _check_graph(graph)
    root = _root(graph, root)
    if graph.number_of_nodes() == 1:
        return 1.0
    chain = graph_chain(graph, root)
    log_deg = sum(np.log(graph.degree(v)) for v in graph.nodes if v != root)
    return float(np.exp(greens_bundle(chain).log_det_G - log_deg))


def count_spanning_trees(graph, root=None):
    """Number of spanning trees: product of non-root degrees times ``det(I - P_A)``."""
    _check_graph(graph)
    root = _root(graph, root)
    n = graph.number_of_nodes()
    if n == 1:
        return 1
    if n > FLOAT_WARNING_VERTICES:
        warnings.warn("determinant-based counting loses precision on large graphs", stacklevel=2)
    chain = graph_chain(graph, root)
    log_deg = sum(np.log(graph.degree(v)) for v in graph.nodes if v != root)
    value = float(np.exp(log_deg - greens_bundle(chain).log_det_G))
    count = round(value)
    if count < 1 or abs(value - count) > 1e-6 * count:
        raise NonIntegerResult(f"tree count {value!r} is not an integer")
    return int(count)


def enumerate_spanning_trees(graph, max_vertices=MAX_ENUMERATION_VERTICES):
    """All spanning trees by filtering ``(n - 1)``-edge subsets."""
    n = graph.number_of_nodes()
    if n > max_vertices:
        raise TooLarge(f"{n} vertices exceeds the enumeration guard of {max_vertices}")
    _check_graph(graph)
    root = next(iter(graph.nodes))
    pos = {v: k for k, v in enumerate(graph.nodes)}
    edges = [(pos[u], pos[v]) for u, v in graph.edges]
    nodes = list(graph.nodes)
    trees = []
    for subset in combinations(range(len(edges)), n - 1):
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for k in subset:
            a, b = find(edges[k][0]), find(edges[k][1])
            if a == b:
                break
            parent[a] = b
        else:
            trees.append(
                SpanningTree(frozenset(frozenset((nodes[edges[k][0]], nodes[edges[k][1]])) for k in subset), root)
            )
    return trees


def grid_graph(rows, cols):
    """``rows x cols`` grid with vertices labelled ``(r, c)``."""
    return nx.grid_2d_graph(rows, cols)
