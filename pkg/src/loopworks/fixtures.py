"""Small reference chains and graphs used by the tests, the CLI and the acceptance run."""

from fractions import Fraction

import networkx as nx
import numpy as np

from .chain import build_binary_tree_chain, build_chain, build_complete_graph_chain


def d3_chain():
    """Three states ``1, 2 | 3`` with ``det G_A = 18/7``."""
    weights = {
        (1, 1): "1/3", (1, 2): "1/3", (1, 3): "1/3",
        (2, 1): "1/2", (2, 2): "1/6", (2, 3): "1/3",
        (3, 3): "1",
    }
    return build_chain([1, 2, 3], [3], weights)


def grid_chain(rows=2, cols=2):
    """Simple random walk on a ``rows x cols`` block of sites framed by absorbing sites.

    Interior ids are ``"i{r}{c}"`` for ``1 <= r <= rows``, ``1 <= c <= cols``;
    frame ids are ``"b{r}{c}"`` for the lattice neighbours outside the block
    (corners are not included, they are unreachable).
    """
    inner = [(r, c) for r in range(1, rows + 1) for c in range(1, cols + 1)]
    inside = set(inner)
    name = {}
    for r, c in inner:
        name[(r, c)] = f"i{r}{c}"
    frame = []
    weights = {}
    for r, c in inner:
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            y = (r + dr, c + dc)
            if y not in inside and y not in name:
                name[y] = f"b{y[0]}{y[1]}"
                frame.append(y)
            weights[(name[(r, c)], name[y])] = 0.25
    for y in frame:
        weights[(name[y], name[y])] = 1.0
    states = [name[v] for v in inner] + sorted(name[v] for v in frame)
    return build_chain(states, [name[v] for v in frame], weights)


def cycle_chain(n=6, boundary=(0, 3)):
    """Simple random walk on the ``n``-cycle stopped at ``boundary``."""
    weights = {}
    for v in range(n):
        if v in boundary:
            weights[(v, v)] = 1.0
        else:
            weights[(v, (v + 1) % n)] = 0.5
            weights[(v, (v - 1) % n)] = 0.5
    return build_chain(list(range(n)), list(boundary), weights)


def acyclic_chain():
    """``1 -> 2 -> 3`` with killing; no loop ever closes."""
    return build_chain([1, 2, 3], [3], {(1, 2): 0.5, (2, 3): 0.5, (3, 3): 1.0})


def nearly_closed_chain(eps=1e-9):
    """Two interior states swapping with probability ``1 - eps``."""
    weights = {(1, 2): 1 - eps, (1, 3): eps, (2, 1): 1 - eps, (2, 3): eps, (3, 3): 1.0}
    return build_chain([1, 2, 3], [3], weights)


def random_chain(n_interior=5, n_boundary=2, seed=7, density=0.6):
    """Seeded substochastic chain with every interior row leaking some mass."""
    rng = np.random.default_rng(seed)
    states = list(range(n_interior + n_boundary))
    weights = {}
    for x in range(n_interior):
        raw = rng.random(len(states)) * (rng.random(len(states)) < density)
        raw[n_interior + x % n_boundary] += 0.5
        raw *= rng.uniform(0.7, 1.0) / raw.sum()
        for y, w in enumerate(raw):
            if w > 0:
                weights[(x, y)] = float(w)
    for b in range(n_interior, n_interior + n_boundary):
        weights[(b, b)] = 1.0
    return build_chain(states, states[n_interior:], weights)


def chain_fixtures():
    """Named chains with at most 12 interior states."""
    return {
        "d3": d3_chain(),
        "grid2x2": grid_chain(2, 2),
        "grid2x3": grid_chain(2, 3),
        "cycle6": cycle_chain(),
        "acyclic": acyclic_chain(),
        "binary_tree3": build_binary_tree_chain(3),
        "complete5": build_complete_graph_chain(5),
        "random5": random_chain(),
    }


def random_connected_graph(n=7, p=0.4, seed=11):
    """First connected ``G(n, p)`` sample at seeds ``seed, seed + 1, ...``."""
    while True:
        g = nx.gnp_random_graph(n, p, seed=seed)
        if nx.is_connected(g):
            return g
        seed += 1


def graph_fixtures():
    """Named simple connected graphs with at most 8 vertices."""
    graphs = {f"K{n}": nx.complete_graph(n) for n in range(2, 8)}
    graphs.update({f"C{n}": nx.cycle_graph(n) for n in (3, 4, 5, 6)})
    graphs["grid2x3"] = nx.grid_2d_graph(2, 3)
    graphs["path5"] = nx.path_graph(5)
    graphs["random7"] = random_connected_graph()
    return graphs


D3_DET_G = Fraction(18, 7)
