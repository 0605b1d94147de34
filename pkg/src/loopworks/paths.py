"""Combinatorics of paths and loops.

Paths are plain tuples of state ids ``(w0, ..., wn)``; a loop is a path whose
first and last entries agree.  The trivial path ``(x,)`` has length zero and
weight one.
"""

from dataclasses import dataclass

from .errors import EndpointMismatch, NotALoop, NotExitPath, UnknownState


def length(path):
    return len(path) - 1


def concat(a, b):
    """Concatenate two paths sharing the junction vertex."""
    if not a or not b:
        raise ValueError("paths must be nonempty")
    if a[-1] != b[0]:
        raise EndpointMismatch(f"{a[-1]!r} != {b[0]!r}")
    return tuple(a) + tuple(b[1:])


def path_weight(chain, path):
    """Product of one-step weights along ``path``."""
    if not path:
        raise ValueError("path must be nonempty")
    index = chain.index
    P = chain.P
    w = 1.0
    try:
        prev = index[path[0]]
        for s in path[1:]:
            cur = index[s]
            w *= P[prev, cur]
            prev = cur
    except KeyError as exc:
        raise UnknownState(f"unknown state {exc.args[0]!r}") from None
    return float(w)


def loop_erase(path):
    """Chronological loop erasure.

    Loops are erased in the order they close, which yields the same
    self-avoiding walk as following last visits from the start.
    """
    if not path:
        raise ValueError("path must be nonempty")
    out = []
    where = {}
    for v in path:
        k = where.get(v)
        if k is None:
            where[v] = len(out)
            out.append(v)
        else:
            for u in out[k + 1:]:
                del where[u]
            del out[k + 1:]
    return tuple(out)


def loop_erase_reverse(path):
    return loop_erase(tuple(path)[::-1])[::-1]


def is_self_avoiding(path):
    return len(set(path)) == len(path)


def _check_exit_path(path, chain):
    if len(path) < 2:
        raise NotExitPath("an exit path takes at least one step")
    if chain is not None:
        if not chain.is_interior(path[0]) or any(not chain.is_interior(v) for v in path[1:-1]):
            raise NotExitPath("exit path must stay interior before its last step")
        if chain.is_interior(path[-1]):
            raise NotExitPath("exit path must end outside the interior")
    elif path[-1] in path[:-1]:
        raise NotExitPath("terminal vertex is visited before the end")


def decompose_path(path, chain=None):
    """Split an exit path into its loop erasure and the erased loops.

    Returns ``(eta, loops)`` where ``loops[j]`` is the excursion of the path at
    ``eta[j]`` from its arrival there until its last departure.  Reassembling
    with :func:`reassemble` gives back ``path``.
    """
    path = tuple(path)
    _check_exit_path(path, chain)
    last = {v: i for i, v in enumerate(path)}
    eta = [path[0]]
    loops = []
    start = 0
    while True:
        i = last[eta[-1]]
        loops.append(path[start:i + 1])
        start = i + 1
        eta.append(path[start])
        if start == len(path) - 1:
            break
    return tuple(eta), loops


def reassemble(eta, loops):
    """Inverse of :func:`decompose_path`."""
    if len(loops) != len(eta) - 1:
        raise ValueError("need one loop per non-terminal vertex of eta")
    out = (eta[0],)
    for j, l in enumerate(loops):
        out = concat(concat(out, l), (eta[j], eta[j + 1]))
    return out


def is_loop(path):
    return len(path) >= 1 and path[0] == path[-1]


def rotate(loop, k=1):
    """Apply the root shift ``k`` times: ``[w1, ..., wn, w1]`` for ``k = 1``."""
    if not is_loop(loop):
        raise NotALoop(f"{loop!r} is not a loop")
    n = len(loop) - 1
    if n == 0:
        return tuple(loop)
    k %= n
    body = tuple(loop[k:-1]) + tuple(loop[:k])
    return body + (body[0],)


def period(loop):
    """Number of distinct rotations of ``loop`` (1 for the trivial loop)."""
    steps = tuple(loop[1:])
    n = len(steps)
    for p in range(1, n + 1):
        if n % p == 0 and steps == steps[p:] + steps[:p]:
            return p
    return 1


def returns(loop, x):
    """``#{1 <= k <= |l| : l_k = x}``."""
    return sum(1 for v in loop[1:] if v == x)


@dataclass(frozen=True)
class LoopStats:
    loop: tuple
    length: int
    J: int
    beta: dict
    J_rooted: dict


def loop_stats(loop):
    """Rotation count, per-site return counts and per-site rooted rotation counts."""
    loop = tuple(loop)
    if not is_loop(loop):
        raise NotALoop(f"{loop!r} is not a loop")
    n = len(loop) - 1
    if n == 0:
        return LoopStats(loop, 0, 1, {loop[0]: 0}, {loop[0]: 0})
    J = period(loop)
    beta = {}
    for v in loop[1:]:
        beta[v] = beta.get(v, 0) + 1
    J_rooted = {v: J * b // n for v, b in beta.items()}
    return LoopStats(loop, n, J, beta, J_rooted)


@dataclass(frozen=True)
class UnrootedLoop:
    canonical: tuple
    J: int

    @property
    def length(self):
        return len(self.canonical) - 1


def canonical_unrooted(loop, rank=None):
    """Least rotation of ``loop`` in lexicographic order.

    ``rank`` maps states to sort keys (for instance ``chain.index``); by
    default the states themselves are compared.
    """
    loop = tuple(loop)
    if not is_loop(loop):
        raise NotALoop(f"{loop!r} is not a loop")
    n = len(loop) - 1
    if n == 0:
        return UnrootedLoop(loop, 1)
    key = (lambda s: s) if rank is None else rank.__getitem__
    body = loop[:-1]
    keys = [key(v) for v in body]
    best = min(range(n), key=lambda k: keys[k:] + keys[:k])
    rot = body[best:] + body[:best]
    return UnrootedLoop(rot + (rot[0],), period(loop))
