"""JSON and CSV readers and writers for chains, graphs, matrices, loops and reports."""

import csv
import io as _io
import json
from fractions import Fraction

import networkx as nx

from .chain import build_chain
from .errors import DomainError
from .paths import UnrootedLoop


def chain_from_dict(data):
    """Build a chain from ``{"states", "boundary", "transitions": [{"from", "to", "p"}]}``.

    ``p`` may be a JSON number or a decimal/fraction string.
    """
    try:
        states = data["states"]
        boundary = data.get("boundary", [])
        weights = {}
        for t in data.get("transitions", []):
            pair = (t["from"], t["to"])
            if pair in weights:
                raise DomainError(f"duplicate transition {pair!r}")
            weights[pair] = t["p"]
    except (KeyError, TypeError, AttributeError) as exc:
        raise DomainError(f"malformed chain document: {exc}") from None
    return build_chain(states, boundary, weights)


def chain_to_dict(chain):
    P = chain.P.tocoo()
    order = sorted(zip(P.row.tolist(), P.col.tolist(), P.data.tolist()))
    return {
        "states": list(chain.states),
        "boundary": list(chain.boundary_order),
        "transitions": [{"from": chain.states[i], "to": chain.states[j], "p": float(p)} for i, j, p in order],
    }


def load_chain(path):
    with open(path) as fh:
        return chain_from_dict(json.load(fh))


def save_chain(chain, path):
    with open(path, "w") as fh:
        json.dump(chain_to_dict(chain), fh, indent=1)
        fh.write("\n")


def graph_from_dict(data):
    """Graph from ``{"vertices", "edges"}`` or from the transition support of a chain document."""
    g = nx.Graph()
    if "vertices" in data:
        g.add_nodes_from(data["vertices"])
        for e in data.get("edges", []):
            u, v = e
            if u not in g or v not in g:
                raise DomainError(f"edge {e!r} uses an unknown vertex")
            g.add_edge(u, v)
        return g
    if "states" in data:
        g.add_nodes_from(data["states"])
        for t in data.get("transitions", []):
            if t["from"] != t["to"] and _as_number(t["p"]) > 0:
                g.add_edge(t["from"], t["to"])
        return g
    raise DomainError("graph document needs 'vertices' or 'states'")


def _as_number(value):
    if isinstance(value, str):
        return Fraction(value.strip())
    return value


def load_document(path):
    with open(path) as fh:
        return json.load(fh)


def matrix_to_dict(order, M):
    return {"order": list(order), "rows": [[float(v) for v in row] for row in M]}


def matrix_to_csv(order, M):
    """Row-major CSV with a header of state ids; 17 significant digits."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + [str(s) for s in order])
    for s, row in zip(order, M):
        w.writerow([str(s)] + [f"{float(v):.17g}" for v in row])
    return buf.getvalue()


def matrix_from_csv(text):
    rows = list(csv.reader(_io.StringIO(text)))
    order = rows[0][1:]
    return order, [[float(v) for v in r[1:]] for r in rows[1:]]


def soup_to_dict(realization):
    """``{"t", "flavor", "loops": [{"loop", "count"}]}``; unrooted entries carry their multiplicity."""
    loops = []
    for l, c in realization.loops.items():
        if isinstance(l, UnrootedLoop):
            loops.append({"loop": list(l.canonical), "multiplicity": l.J, "count": int(c)})
        else:
            loops.append({"loop": list(l), "count": int(c)})
    loops.sort(key=lambda e: (len(e["loop"]), [str(v) for v in e["loop"]]))
    return {"t": realization.t, "flavor": realization.flavor.value, "loops": loops}


def measure_to_csv(rows):
    """``rows`` of ``(loop, mass)``; written as loop, length, mass."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["loop", "length", "mass"])
    for loop, mass in rows:
        w.writerow([" ".join(str(v) for v in loop), len(loop) - 1, f"{float(mass):.17g}"])
    return buf.getvalue()


def lerw_to_list(distribution, rank=None):
    return [{"saw": list(eta), "p": float(p)} for eta, p in distribution.sorted_items(rank)]


def tree_to_list(tree, rank=None):
    return [list(e) for e in tree.sorted_edges(rank)]


def dumps(report):
    """Deterministic JSON rendering."""
    return json.dumps(report, sort_keys=True, indent=1) + "\n"
