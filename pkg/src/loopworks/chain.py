"""Killed Markov chains on a finite state space with boundary.

A chain is a set of states split into an interior ``A`` and a boundary, with
one-step weights whose row sums may fall short of one.  The missing mass is
killing: walkers that take it land in the reserved :data:`CEMETERY` state.
"""

from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from math import comb, exp, lgamma, log

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DomainError,
    MaxStepsExceeded,
    NegativeWeight,
    RowSumExceedsOne,
    SingularInterior,
    UnknownState,
)

CEMETERY = "<cemetery>"
DEFAULT_MAX_STEPS = 10**6

ROW_SUM_TOL = 1e-12
# relative pivot size below which the interior factorization is declared singular
PIVOT_TOL = 1e-13


class ChainSpec:
    """Validated killed Markov chain.

    Parameters are normally supplied through :func:`build_chain`.  Instances
    are treated as immutable; derived quantities are cached on first use.
    """

    def __init__(self, states, boundary, matrix):
        self.states = tuple(states)
        self.boundary = frozenset(boundary)
        self.index = {s: i for i, s in enumerate(self.states)}
        self.interior = tuple(s for s in self.states if s not in self.boundary)
        self.boundary_order = tuple(s for s in self.states if s in self.boundary)
        self.interior_idx = np.array([self.index[s] for s in self.interior], dtype=int)
        self.boundary_idx = np.array([self.index[s] for s in self.boundary_order], dtype=int)
        self.P = sp.csr_matrix(matrix)
        self.P.sort_indices()
        self.cache = {}

    def __repr__(self):
        return (
            f"ChainSpec(states={len(self.states)}, interior={len(self.interior)}, "
            f"boundary={len(self.boundary_order)})"
        )

    @property
    def n_states(self):
        return len(self.states)

    def is_interior(self, state):
        return state in self.index and state not in self.boundary

    def weight(self, x, y):
        try:
            return float(self.P[self.index[x], self.index[y]])
        except KeyError as exc:
            raise UnknownState(f"unknown state {exc.args[0]!r}") from None

    def successors(self, x):
        """Map of states reachable in one step from ``x`` to their weights."""
        i = self.index[x]
        lo, hi = self.P.indptr[i], self.P.indptr[i + 1]
        return {self.states[j]: float(w) for j, w in zip(self.P.indices[lo:hi], self.P.data[lo:hi]) if w > 0}

    def row_sums(self):
        return np.asarray(self.P.sum(axis=1)).ravel()

    @cached_property
    def interior_mask(self):
        mask = [False] * self.n_states
        for i in self.interior_idx:
            mask[i] = True
        return mask

    @cached_property
    def step_table(self):
        """Per-state (cumulative weights, target indices) used by the samplers.

        A row whose deficit is below ``ROW_SUM_TOL`` is treated as stochastic so
        that rounding never leaks walkers into the cemetery.
        """
        table = []
        for i in range(self.n_states):
            lo, hi = self.P.indptr[i], self.P.indptr[i + 1]
            cum, targets, acc = [], [], 0.0
            for j, w in zip(self.P.indices[lo:hi], self.P.data[lo:hi]):
                if w > 0:
                    acc += float(w)
                    cum.append(acc)
                    targets.append(int(j))
            if cum and 1.0 - cum[-1] < ROW_SUM_TOL:
                cum[-1] = 1.0
            table.append((cum, targets))
        return table

    @cached_property
    def interior_factor(self):
        """Sparse LU factorization of ``I - P_A`` (``None`` if ``A`` is empty)."""
        return factor_domain(self, self.interior_idx)


def factor_domain(chain, idx):
    """Sparse LU of ``I - P_D`` for the domain with state indices ``idx``."""
    n = len(idx)
    if n == 0:
        return None
    sub = chain.P[idx][:, idx]
    L = (sp.identity(n, format="csc") - sub).tocsc()
    try:
        lu = spla.splu(L)
    except RuntimeError as exc:
        raise SingularInterior(str(exc)) from None
    diag = np.abs(lu.U.diagonal())
    if diag.min() <= PIVOT_TOL * max(1.0, diag.max()):
        raise SingularInterior("I - P_A is numerically singular")
    return lu


def _parse_prob(value):
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


def build_chain(states, boundary, weights):
    """Validate and assemble a :class:`ChainSpec`.

    Parameters
    ----------
    states : sequence
        Ordered, distinct, hashable state ids.
    boundary : iterable
        Subset of ``states`` forming the boundary.
    weights : mapping
        ``{(from, to): probability}``; probabilities may be floats, decimal
        strings or fraction strings.  Unlisted pairs have weight zero.

    Raises
    ------
    UnknownState, NegativeWeight, RowSumExceedsOne, SingularInterior
    """
    states = list(states)
    if not states:
        raise ValueError("a chain needs at least one state")
    if len(set(states)) != len(states):
        raise ValueError("duplicate state ids")
    if CEMETERY in states:
        raise ValueError(f"{CEMETERY!r} is a reserved state id")
    index = {s: i for i, s in enumerate(states)}
    boundary = list(boundary)
    for b in boundary:
        if b not in index:
            raise UnknownState(f"boundary state {b!r} is not a state")
    rows, cols, vals = [], [], []
    for (x, y), w in dict(weights).items():
        if x not in index:
            raise UnknownState(f"unknown state {x!r}")
        if y not in index:
            raise UnknownState(f"unknown state {y!r}")
        w = _parse_prob(w)
        if w < 0 or w != w:
            raise NegativeWeight(f"weight p({x!r}, {y!r}) = {w} is negative")
        if w == 0:
            continue
        rows.append(index[x])
        cols.append(index[y])
        vals.append(w)
    n = len(states)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    sums = np.asarray(P.sum(axis=1)).ravel()
    bad = np.nonzero(sums > 1 + ROW_SUM_TOL)[0]
    if len(bad):
        i = int(bad[0])
        raise RowSumExceedsOne(f"row {states[i]!r} sums to {sums[i]!r} > 1")
    chain = ChainSpec(states, boundary, P)
    chain.interior_factor  # validates invertibility of I - P_A
    return chain


def n_step_matrix(chain, n):
    """Dense ``P**n`` over all states (``P**0`` is the identity)."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    return np.linalg.matrix_power(chain.P.toarray(), n)


@dataclass(frozen=True)
class ExitSample:
    path: tuple
    exit: object


def walk_until(chain, start_idx, inside, rng, max_steps):
    """Run the chain from ``start_idx`` until it first stands outside ``inside``.

    ``inside`` is a per-index boolean list.  Returns the list of visited indices,
    with ``-1`` standing for the cemetery.
    """
    table = chain.step_table
    rand = rng.random
    path = [start_idx]
    i = start_idx
    for _ in range(max_steps):
        cum, targets = table[i]
        k = bisect_right(cum, rand())
        i = targets[k] if k < len(targets) else -1
        path.append(i)
        if i < 0 or not inside[i]:
            return path
    raise MaxStepsExceeded(f"walk from {chain.states[start_idx]!r} exceeded {max_steps} steps")


def to_states(chain, idx_path):
    states = chain.states
    return tuple(CEMETERY if i < 0 else states[i] for i in idx_path)


def sample_exit_path(chain, start, rng, max_steps=DEFAULT_MAX_STEPS):
    """Sample the chain from ``start`` stopped on first leaving ``A``.

    Killed walkers end at :data:`CEMETERY`.
    """
    if not chain.is_interior(start):
        raise DomainError(f"start state {start!r} is not interior")
    if max_steps <= 0:
        raise DomainError("max_steps must be positive")
    path = to_states(chain, walk_until(chain, chain.index[start], chain.interior_mask, rng, max_steps))
    return ExitSample(path, path[-1])


def nn_walk_return_prob(q, n):
    """``P^0{X_n = 0}`` for the nearest-neighbour walk on the integers."""
    if not 0 < q < 1:
        raise DomainError("q must lie in (0, 1)")
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n % 2:
        return 0.0
    m = n // 2
    if m < 500:
        return comb(2 * m, m) * (q * (1 - q)) ** m
    return exp(lgamma(2 * m + 1) - 2 * lgamma(m + 1) + m * (log(q) + log(1 - q)))


class Recurrence(str, Enum):
    RECURRENT = "recurrent"
    TRANSIENT = "transient"


def classify_nn_walk(q, tol=1e-15):
    if not 0 < q < 1:
        raise DomainError("q must lie in (0, 1)")
    return Recurrence.RECURRENT if abs(q - 0.5) <= tol else Recurrence.TRANSIENT


def build_binary_tree_chain(depth):
    """Walk on binary strings of length <= ``depth``.

    Each string moves to its parent and to each child with weight 1/3; the
    empty string (``""``) keeps 1/3 on itself.  Strings of length ``depth``
    form an absorbing truncation boundary.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    third = 1.0 / 3.0
    levels = [[""]]
    for _ in range(depth):
        levels.append([s + c for s in levels[-1] for c in "01"])
    states = [s for level in levels for s in level]
    weights = {("", ""): third}
    for level in levels[:-1]:
        for a in level:
            for c in "01":
                weights[(a, a + c)] = third
                if len(a) + 1 < depth:
                    weights[(a + c, a)] = third
    for b in levels[-1]:
        weights[(b, b)] = 1.0
    return build_chain(states, levels[-1], weights)


def build_complete_graph_chain(n_plus_1):
    """Simple random walk on the complete graph with vertex 0 as boundary/root."""
    if n_plus_1 < 2:
        raise DomainError("need at least two vertices")
    p = 1.0 / (n_plus_1 - 1)
    weights = {(x, y): p for x in range(1, n_plus_1) for y in range(n_plus_1) if x != y}
    weights[(0, 0)] = 1.0
    return build_chain(range(n_plus_1), [0], weights)


@dataclass(frozen=True)
class JumpEvent:
    holding_time: float
    next_state: object


def _rate_of(site_rates, x):
    return float(site_rates(x) if callable(site_rates) else site_rates[x])


def sample_ctmc_jump(chain, site_rates, x, rng):
    """One jump of the continuous-time chain with holding rate ``site_rates(x)``."""
    if not chain.is_interior(x):
        raise DomainError(f"{x!r} is not interior")
    rate = _rate_of(site_rates, x)
    if not rate > 0:
        raise DomainError("holding rate must be positive")
    holding = rng.exponential(1.0 / rate)
    cum, targets = chain.step_table[chain.index[x]]
    k = bisect_right(cum, rng.random())
    nxt = chain.states[targets[k]] if k < len(targets) else CEMETERY
    return JumpEvent(float(holding), nxt)


def competing_clocks(rates, rng):
    """Race independent exponential clocks; return (first ring time, winner index)."""
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0 or np.any(rates <= 0):
        raise DomainError("rates must be positive")
    times = rng.exponential(1.0 / rates)
    k = int(np.argmin(times))
    return float(times[k]), k
