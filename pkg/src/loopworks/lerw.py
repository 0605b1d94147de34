"""Loop-erased random walk: samplers, exact law, Laplacian-walk steps, loop decoration."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .chain import CEMETERY, DEFAULT_MAX_STEPS, sample_exit_path, to_states, walk_until
from .errors import DeadEnd, DomainError, NotExitSaw, TooLarge
from .linops import _interior_dense, _lu, _positions, green_diagonal
from .paths import concat, is_self_avoiding, loop_erase, path_weight

MAX_ENUMERATION_INTERIOR = 12


def sample_lerw(chain, x, rng, max_steps=DEFAULT_MAX_STEPS):
    """Loop erasure of one exit path from ``x``; returns ``(eta, exit_state)``."""
    sample = sample_exit_path(chain, x, rng, max_steps)
    return loop_erase(sample.path), sample.exit


def _check_exit_saw(chain, eta):
    eta = tuple(eta)
    if len(eta) < 2 or not is_self_avoiding(eta):
        raise NotExitSaw(f"{eta!r} is not a self-avoiding walk with a step")
    if any(not chain.is_interior(v) for v in eta[:-1]):
        raise NotExitSaw("all but the last vertex must be interior")
    if eta[-1] == CEMETERY or eta[-1] not in chain.boundary:
        raise NotExitSaw("the last vertex must be a boundary state")
    return eta


def lerw_prob(chain, eta):
    """Exact LERW probability ``p(eta) * F_eta(A)``."""
    eta = _check_exit_saw(chain, eta)
    value = path_weight(chain, eta)
    if value == 0.0:
        return 0.0
    removed = set()
    for v in eta[:-1]:
        value *= green_diagonal(chain, [s for s in chain.interior if s not in removed], v)
        removed.add(v)
    return value


@dataclass(frozen=True)
class LerwDistribution:
    start: object
    targets: tuple
    entries: dict

    def exit_totals(self):
        totals = dict.fromkeys(self.targets, 0.0)
        for eta, p in self.entries.items():
            totals[eta[-1]] = totals.get(eta[-1], 0.0) + p
        return totals

    def sorted_items(self, rank=None):
        """Entries by decreasing probability, ties broken lexicographically."""
        key = (lambda s: s) if rank is None else rank.__getitem__
        return sorted(self.entries.items(), key=lambda kv: (-kv[1], [key(v) for v in kv[0]]))


def enumerate_lerw(chain, x, max_interior=MAX_ENUMERATION_INTERIOR):
    """Exact LERW law from ``x`` by listing every self-avoiding exit walk."""
    if not chain.is_interior(x):
        raise DomainError(f"{x!r} is not interior")
    if len(chain.interior) > max_interior:
        raise TooLarge(f"{len(chain.interior)} interior states exceeds the guard of {max_interior}")
    interior = chain.interior

    @lru_cache(maxsize=None)
    def diag(removed, v):
        return green_diagonal(chain, [s for s in interior if s not in removed], v)

    entries = {}

    def extend(prefix, removed, value):
        v = prefix[-1]
        value *= diag(removed, v)
        removed = removed | {v}
        for y, w in chain.successors(v).items():
            if y in removed:
                continue
            if chain.is_interior(y):
                extend(prefix + (y,), removed, value * w)
            else:
                entries[prefix + (y,)] = value * w

    extend((x,), frozenset(), 1.0)
    return LerwDistribution(x, chain.boundary_order, entries)


def _exit_mass_into(chain, domain, targets):
    """``H_D(y, V)`` for every ``y`` in ``domain``, as a mapping."""
    pos = sorted(set(_positions(chain, domain)))
    if not pos:
        return {}
    idx = chain.interior_idx[pos]
    tidx = [chain.index[t] for t in targets]
    rhs = np.asarray(chain.P[idx][:, tidx].sum(axis=1)).ravel()
    P_A = _interior_dense(chain)
    M = np.eye(len(pos)) - P_A[np.ix_(pos, pos)]
    h = sla.lu_solve(_lu(M), rhs)
    return {chain.interior[k]: float(v) for k, v in zip(pos, h)}


def _targets(chain, targets):
    if targets is None:
        return tuple(chain.boundary_order)
    targets = tuple(targets)
    if not targets or any(t not in chain.boundary for t in targets):
        raise DomainError("targets must be a nonempty set of boundary states")
    return targets


def laplacian_walk_step(chain, prefix, targets=None):
    """Law of the next vertex of a LERW conditioned to exit in ``targets``.

    ``prefix`` is the self-avoiding walk generated so far; its vertices are
    removed from the domain (slit domain) and the candidate ``y`` is weighted
    by ``p(x, y) H(y, V)`` with ``H = 1`` on ``V`` itself.
    """
    prefix = tuple(prefix)
    if not prefix or not is_self_avoiding(prefix) or any(not chain.is_interior(v) for v in prefix):
        raise DomainError("prefix must be a nonempty interior self-avoiding walk")
    V = _targets(chain, targets)
    x = prefix[-1]
    taken = set(prefix)
    domain = [s for s in chain.interior if s not in taken]
    h = _exit_mass_into(chain, domain, V)
    vset = set(V)
    weights = {}
    for y, w in chain.successors(x).items():
        if y in vset:
            weights[y] = weights.get(y, 0.0) + w
        elif y in h and h[y] > 0:
            weights[y] = w * h[y]
    total = sum(weights.values())
    if not total > 0:
        raise DeadEnd(f"no admissible continuation from {x!r}")
    return {y: w / total for y, w in weights.items()}


def laplacian_walk_path_prob(chain, eta, targets=None):
    """Product of the Laplacian-walk step probabilities along ``eta``."""
    eta = _check_exit_saw(chain, eta)
    value = 1.0
    for j in range(len(eta) - 1):
        step = laplacian_walk_step(chain, eta[:j + 1], targets)
        value *= step.get(eta[j + 1], 0.0)
        if value == 0.0:
            break
    return value


def sample_laplacian_walk(chain, x, rng, targets=None):
    """Grow a LERW from ``x`` conditioned to exit in ``targets`` step by step."""
    V = set(_targets(chain, targets))
    eta = (x,)
    while True:
        step = laplacian_walk_step(chain, eta, targets)
        ys = list(step)
        k = int(np.searchsorted(np.cumsum([step[y] for y in ys]), rng.random(), side="right"))
        y = ys[min(k, len(ys) - 1)]
        eta += (y,)
        if y in V:
            return eta


def sample_erased_loops(chain, eta, rng, max_steps=DEFAULT_MAX_STEPS):
    """Loops to hang on ``eta``, one per non-terminal vertex.

    At ``eta[j]`` an independent walk runs until it leaves
    ``A_j = A \\ {eta_0..eta_{j-1}}``; the loop is its initial segment up to
    the last visit to ``eta[j]``.
    """
    eta = _check_exit_saw(chain, eta)
    inside = list(chain.interior_mask)
    loops = []
    for v in eta[:-1]:
        i = chain.index[v]
        walk = walk_until(chain, i, inside, rng, max_steps)
        last = max(k for k, s in enumerate(walk) if s == i)
        loops.append(to_states(chain, walk[:last + 1]))
        inside[i] = False
    return loops


def decorate_with_loops(chain, eta, rng, max_steps=DEFAULT_MAX_STEPS):
    """Rebuild an exit path from a LERW by hanging independent loops on it."""
    eta = tuple(eta)
    loops = sample_erased_loops(chain, eta, rng, max_steps)
    out = (eta[0],)
    for j, l in enumerate(loops):
        out = concat(concat(out, l), (eta[j], eta[j + 1]))
    return out
