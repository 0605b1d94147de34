"""Growing loops and loop soups (ordered, rooted and unrooted).

A growing loop at ``x`` is a concatenation of a negative-binomial number of
independent elementary (first-return) loops.  The ordered soup runs one
growing loop per site in shrinking domains; the rooted soup re-roots each
arrival uniformly, and the unrooted soup forgets the root altogether.
"""

from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from math import exp, lgamma, log

import numpy as np
import scipy.linalg as sla

from .chain import DEFAULT_MAX_STEPS
from .errors import (
    DomainError,
    DomainMismatch,
    MaxRetriesExceeded,
    MaxStepsExceeded,
    NotALoopAtX,
    TooLarge,
    TrivialLoop,
    ZeroMass,
)
from .linops import _interior_dense, _lu, _positions, green_diagonal, green_on, greens_bundle
from .paths import UnrootedLoop, canonical_unrooted, concat, is_loop, loop_stats, path_weight, returns, rotate

DEFAULT_MAX_RETRIES = 10**6
ZERO_MASS_TOL = 1e-14


class Flavor(str, Enum):
    ORDERED = "ordered"
    ROOTED = "rooted"
    UNROOTED = "unrooted"


def _domain(chain, domain):
    if domain is None:
        return list(chain.interior)
    domain = list(domain)
    if any(not chain.is_interior(s) for s in domain):
        raise DomainError("domain must be a subset of the interior")
    return domain


def _check_site(chain, x, domain):
    if x not in domain:
        raise DomainError(f"{x!r} is not in the domain")


def elementary_mass(chain, x, domain=None):
    """Total weight of first-return loops at ``x`` inside the domain: ``1 - 1/G(x, x)``."""
    domain = _domain(chain, domain)
    _check_site(chain, x, domain)
    return 1.0 - 1.0 / green_diagonal(chain, domain, x)


def negative_binomial_pmf(k, t, f):
    """``P{K_t = k} = (1 - f)^t Gamma(k + t) / (k! Gamma(t)) f^k``."""
    if k < 0:
        return 0.0
    if t == 0:
        return 1.0 if k == 0 else 0.0
    if f == 0:
        return 1.0 if k == 0 else 0.0
    return exp(t * log1m(f) + lgamma(k + t) - lgamma(k + 1) - lgamma(t) + k * log(f))


def log1m(f):
    return float(np.log1p(-f))


def sample_negative_binomial(t, f, rng):
    """Inverse-transform draw of the elementary-loop count at time ``t``."""
    if t < 0 or not 0 <= f < 1:
        raise DomainError("need t >= 0 and 0 <= f < 1")
    if t == 0 or f == 0:
        return 0
    u = rng.random()
    p = exp(t * log1m(f))
    cum = p
    k = 0
    while cum <= u:
        p *= f * (k + t) / (k + 1)
        k += 1
        cum += p
        if p < 1e-300 and k > t:
            break
    return k


def chinese_restaurant_blocks(K, theta, rng):
    """Block sizes of a Chinese-restaurant partition of ``K`` items, in random order."""
    sizes = []
    for i in range(K):
        u = rng.random() * (theta + i)
        if u < theta:
            sizes.append(1)
            continue
        u -= theta
        acc = 0
        for b, s in enumerate(sizes):
            acc += s
            if u < acc:
                sizes[b] += 1
                break
        else:
            sizes[-1] += 1
    return [int(s) for s in rng.permutation(sizes)] if sizes else []


def sample_elementary_loop(
    chain, x, rng, domain=None, max_retries=DEFAULT_MAX_RETRIES, max_steps=DEFAULT_MAX_STEPS
):
    """Draw a first-return loop at ``x`` from the normalized weight ``p(l)/f_x``.

    The chain is run from ``x``; the trajectory is kept if it comes back to
    ``x`` before leaving the domain and discarded otherwise.
    """
    domain = _domain(chain, domain)
    _check_site(chain, x, domain)
    if elementary_mass(chain, x, domain) <= ZERO_MASS_TOL:
        raise ZeroMass(f"no loops return to {x!r}")
    inside = [False] * chain.n_states
    for s in domain:
        inside[chain.index[s]] = True
    table = chain.step_table
    states = chain.states
    rand = rng.random
    xi = chain.index[x]
    for _ in range(max_retries):
        path = [xi]
        i = xi
        for _ in range(max_steps):
            cum, targets = table[i]
            k = bisect_right(cum, rand())
            i = targets[k] if k < len(targets) else -1
            path.append(i)
            if i == xi:
                return tuple(states[j] for j in path)
            if i < 0 or not inside[i]:
                break
        else:
            raise MaxStepsExceeded(f"excursion from {x!r} exceeded {max_steps} steps")
    raise MaxRetriesExceeded(f"no loop at {x!r} accepted after {max_retries} tries")


@dataclass(frozen=True)
class GrowingLoopState:
    """Growing loop at ``site`` observed at time ``t``.

    ``events`` groups the elementary loops into the arrival events of the
    underlying Poisson clocks, in time order.
    """

    site: object
    t: float
    K: int
    loop: tuple
    elementary: tuple = ()
    events: tuple = ()


def sample_growing_loop(chain, x, t, rng, domain=None):
    if t < 0:
        raise DomainError("t must be nonnegative")
    domain = _domain(chain, domain)
    _check_site(chain, x, domain)
    f = elementary_mass(chain, x, domain)
    K = sample_negative_binomial(t, f, rng) if f > ZERO_MASS_TOL else 0
    pieces = tuple(sample_elementary_loop(chain, x, rng, domain) for _ in range(K))
    loop = (x,)
    for piece in pieces:
        loop = concat(loop, piece)
    events = []
    start = 0
    for size in chinese_restaurant_blocks(K, t, rng):
        ev = (x,)
        for piece in pieces[start:start + size]:
            ev = concat(ev, piece)
        events.append(ev)
        start += size
    return GrowingLoopState(x, float(t), K, loop, pieces, tuple(events))


def _check_loop_in(chain, x, l, domain):
    l = tuple(l)
    if not is_loop(l) or l[0] != x:
        raise NotALoopAtX(f"{l!r} is not a loop rooted at {x!r}")
    allowed = set(domain)
    if any(v not in allowed for v in l):
        raise NotALoopAtX(f"{l!r} leaves the domain")
    return l


def growing_loop_log_pmf(chain, x, t, l, domain=None):
    """Natural log of :func:`growing_loop_pmf`; ``-inf`` for zero-weight loops."""
    if not t > 0:
        raise DomainError("t must be positive")
    domain = _domain(chain, domain)
    _check_site(chain, x, domain)
    l = _check_loop_in(chain, x, l, domain)
    p = path_weight(chain, l)
    if p == 0.0:
        return float("-inf")
    k = returns(l, x)
    g = green_diagonal(chain, domain, x)
    return -t * log(g) + lgamma(k + t) - lgamma(k + 1) - lgamma(t) + log(p)


def growing_loop_pmf(chain, x, t, l, domain=None):
    """``P{l_t = l} = G(x, x)^{-t} Gamma(k + t) / (k! Gamma(t)) p(l)`` with ``k`` returns to ``x``."""
    return exp(growing_loop_log_pmf(chain, x, t, l, domain))


def _shrinking_domains(chain, ordering):
    ordering = list(ordering)
    if len(ordering) != len(chain.interior) or set(ordering) != set(chain.interior):
        raise DomainError("ordering must be a permutation of the interior")
    removed = set()
    out = []
    for x in ordering:
        out.append((x, [s for s in chain.interior if s not in removed]))
        removed.add(x)
    return out


@dataclass(frozen=True)
class SoupRealization:
    flavor: Flavor
    t: float
    loops: Counter
    ordering: tuple = ()
    config: tuple = field(default=(), compare=False)

    @property
    def total(self):
        return sum(self.loops.values())

    def is_empty(self):
        return self.total == 0


def sample_soup_config(chain, ordering, t, rng):
    """Ordered soup: independent growing loops at ``x_j`` in ``A_j``.

    ``loops`` counts the arrival events (each a loop rooted at its site);
    ``config`` holds the growing-loop states themselves.
    """
    states = tuple(sample_growing_loop(chain, x, t, rng, dom) for x, dom in _shrinking_domains(chain, ordering))
    loops = Counter(ev for st in states for ev in st.events)
    return SoupRealization(Flavor.ORDERED, float(t), loops, tuple(ordering), states)


def config_pmf(chain, ordering, t, config):
    """Probability that the ordered configuration at time ``t`` equals ``config``."""
    config = list(config)
    doms = _shrinking_domains(chain, ordering)
    if len(config) != len(doms):
        raise DomainMismatch("config must hold one loop per site")
    value = 1.0
    for (x, dom), l in zip(doms, config):
        try:
            value *= growing_loop_pmf(chain, x, t, l, dom)
        except NotALoopAtX as exc:
            raise DomainMismatch(str(exc)) from None
    return value


def _min_index_root(ordering, l):
    rank = {s: k for k, s in enumerate(ordering)}
    return min(l, key=rank.__getitem__)


def loop_measure(chain, l, flavor, ordering=None):
    """Mass of a nontrivial loop under the rooted, unrooted or ordered measure.

    For the ordered measure a loop not rooted at its lowest-ranked vertex
    under ``ordering`` has mass zero.
    """
    flavor = Flavor(flavor)
    if isinstance(l, UnrootedLoop):
        l = l.canonical
    l = tuple(l)
    if not is_loop(l):
        raise NotALoopAtX(f"{l!r} is not a loop")
    if len(l) == 1:
        raise TrivialLoop("loop measures live on nontrivial loops")
    if any(not chain.is_interior(v) for v in l):
        return 0.0
    p = path_weight(chain, l)
    n = len(l) - 1
    if flavor is Flavor.ROOTED:
        return p / n
    if flavor is Flavor.UNROOTED:
        return loop_stats(l).J * p / n
    ordering = list(chain.interior) if ordering is None else list(ordering)
    if l[0] != _min_index_root(ordering, l):
        return 0.0
    return p / returns(l, l[0])


@dataclass(frozen=True)
class MeasureTotal:
    flavor: Flavor
    truncation_len: int
    partial: float
    tail_bound: float
    per_site: dict = field(default_factory=dict)


def _loop_length_guard(chain, truncation_len):
    limit = 20 if len(chain.interior) <= 3 else 12
    if truncation_len > limit:
        raise TooLarge(f"loop enumeration is capped at length {limit} for this chain")


def _is_lyndon(word):
    n = len(word)
    return all(word < word[k:] + word[:k] for k in range(1, n))


def enumerate_unrooted_loops(chain, max_len, max_count=10**6):
    """Rotation classes of loops in ``A`` of length <= ``max_len`` with positive weight.

    Each primitive class is found once, as the walk rooted at its smallest
    state whose step word is a Lyndon word; its powers are added directly.
    Returns ``{UnrootedLoop: mass}`` under the unrooted measure.
    """
    _loop_length_guard(chain, max_len)
    P_A = _interior_dense(chain)
    names = chain.interior
    n = len(names)
    nbrs = [[(b, P_A[a, b]) for b in range(n) if P_A[a, b] > 0] for a in range(n)]
    out = {}

    def grow(word, w):
        a = word[-1]
        for b, q in nbrs[a]:
            if b < word[0]:
                continue
            if b == word[0] and _is_lyndon(word):
                p = w * q
                m = len(word)
                body = tuple(names[k] for k in word)
                for r in range(1, max_len // m + 1):
                    out[UnrootedLoop(body * r + (body[0],), m)] = p**r / r
                if len(out) > max_count:
                    raise TooLarge("too many loop classes to enumerate")
            if len(word) < max_len:
                grow(word + [b], w * q)

    for root in range(n):
        grow([root], 1.0)
    return out


def enumerate_rooted_loops(chain, max_len, domain=None, roots=None, max_count=10**6):
    """Every loop of length 1..``max_len`` inside the domain with its weight."""
    domain = _domain(chain, domain)
    allowed = set(domain)
    roots = domain if roots is None else list(roots)
    out = {}

    def grow(path, w):
        if len(out) > max_count:
            raise TooLarge("too many loops to enumerate")
        if len(path) - 1 == max_len:
            return
        for y, q in chain.successors(path[-1]).items():
            if y not in allowed:
                continue
            nxt = path + (y,)
            if y == path[0]:
                out[nxt] = w * q
            grow(nxt, w * q)

    for x in roots:
        grow((x,), 1.0)
    return out


def _ordered_site_sum(P_D, k, max_len):
    """Sum of ``p(l)/beta(l)`` over loops at position ``k`` of length <= ``max_len``."""
    r = [1.0]
    M = np.eye(len(P_D))
    for _ in range(max_len):
        M = M @ P_D
        r.append(float(M[k, k]))
    e = [0.0] * (max_len + 1)
    for n in range(1, max_len + 1):
        e[n] = r[n] - sum(e[i] * r[n - i] for i in range(1, n))
    total = 0.0
    a = e[:]
    for j in range(1, max_len + 1):
        total += sum(a) / j
        a = [sum(a[i] * e[n - i] for i in range(1, n)) for n in range(max_len + 1)]
        if not any(a):
            break
    return total, M @ P_D


def measure_total(chain, flavor, truncation_len, ordering=None):
    """Partial sum of a loop measure over loops of length <= ``truncation_len``.

    The rooted total is summed by loop length through matrix powers, the
    unrooted total by enumerating rotation classes, and the ordered total by
    splitting loops at each site into elementary loops.  ``tail_bound`` bounds
    the omitted mass.
    """
    flavor = Flavor(flavor)
    if truncation_len < 1:
        raise DomainError("truncation_len must be >= 1")
    P_A = _interior_dense(chain)
    G = greens_bundle(chain).G_A
    L = truncation_len
    if flavor is Flavor.ROOTED:
        M = np.eye(len(P_A))
        partial = 0.0
        for n in range(1, L + 1):
            M = M @ P_A
            partial += np.trace(M) / n
        tail = float(np.trace(M @ P_A @ G)) / (L + 1)
        return MeasureTotal(flavor, L, float(partial), tail)
    if flavor is Flavor.UNROOTED:
        masses = enumerate_unrooted_loops(chain, L)
        M = np.linalg.matrix_power(P_A, L + 1)
        tail = float(np.trace(M @ G)) / (L + 1)
        return MeasureTotal(flavor, L, float(sum(masses.values())), tail)
    ordering = list(chain.interior) if ordering is None else list(ordering)
    per_site = {}
    partial = 0.0
    tail = 0.0
    for x, dom in _shrinking_domains(chain, ordering):
        pos = sorted(_positions(chain, dom))
        P_D = P_A[np.ix_(pos, pos)]
        k = pos.index(_positions(chain, [x])[0])
        s, M_next = _ordered_site_sum(P_D, k, L)
        G_D = green_on(chain, dom)
        per_site[x] = s
        partial += s
        tail += float((M_next @ G_D)[k, k])
    return MeasureTotal(flavor, L, partial, tail, per_site)


def sample_rooted_soup(chain, t, rng, ordering=None):
    """Rooted soup from an ordered soup by re-rooting every arrival uniformly."""
    ordering = tuple(chain.interior) if ordering is None else tuple(ordering)
    ordered = sample_soup_config(chain, ordering, t, rng)
    loops = Counter()
    for st in ordered.config:
        for ev in st.events:
            loops[rotate(ev, int(rng.integers(len(ev) - 1)))] += 1
    return SoupRealization(Flavor.ROOTED, float(t), loops, ordering)


def sample_unrooted_soup(chain, t, rng, ordering=None):
    """Unrooted soup: a rooted soup with every root forgotten."""
    rooted = sample_rooted_soup(chain, t, rng, ordering)
    rank = chain.index
    loops = Counter()
    for l, c in rooted.loops.items():
        loops[canonical_unrooted(l, rank)] += c
    return SoupRealization(Flavor.UNROOTED, float(t), loops, rooted.ordering)


class TruncatedRootedSoup:
    """Direct Poisson sampler over the rooted measure restricted to short loops."""

    def __init__(self, chain, max_len=10):
        masses = {l: p / (len(l) - 1) for l, p in enumerate_rooted_loops(chain, max_len).items() if p > 0}
        self.max_len = max_len
        self.loops = list(masses)
        self.masses = np.array([masses[l] for l in self.loops])

    def sample(self, t, rng):
        counts = rng.poisson(t * self.masses)
        nz = np.nonzero(counts)[0]
        return SoupRealization(Flavor.ROOTED, float(t), Counter({self.loops[i]: int(counts[i]) for i in nz}))


def empty_soup_prob(chain, t):
    """``(det G_A)^{-t}``."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    return exp(-t * greens_bundle(chain).log_det_G)


def site_visit_stats(chain, x, w, t):
    """Visit probability and expected visit count of ``w`` in the growing loop at ``x``.

    The loop at ``x`` grows in the full interior (the first site of an
    ordering).  Returns ``(P{loop visits w}, E[# of w in the loop])``.
    """
    if not chain.is_interior(x) or not chain.is_interior(w) or x == w:
        raise DomainError("x and w must be distinct interior states")
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t == 0:
        return 0.0, 0.0
    A = list(chain.interior)
    g = green_diagonal(chain, A, x)
    g_without_w = green_diagonal(chain, [s for s in A if s != w], x)
    visit = 1.0 - (g_without_w / g) ** t
    # E[# of w per elementary loop] * f = sum_y p(x, y) G_{A\x}(y, w) * P^w{hit x inside A}
    rest = [s for s in A if s != x]
    pos = sorted(_positions(chain, rest))
    P_A = _interior_dense(chain)
    kx = _positions(chain, [x])[0]
    M = np.eye(len(pos)) - P_A[np.ix_(pos, pos)]
    lu = _lu(M)
    G_rest = sla.lu_solve(lu, np.eye(len(pos)))
    hit_x = sla.lu_solve(lu, P_A[pos, kx])
    jw = pos.index(_positions(chain, [w])[0])
    into_w = float(P_A[kx, pos] @ G_rest[:, jw])
    mass = into_w * float(hit_x[jw])
    return float(visit), float(t * g * mass)
