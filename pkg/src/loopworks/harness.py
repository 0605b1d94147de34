"""Exact path enumeration, seeded empirical distributions and goodness-of-fit checks."""

import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import log, sqrt

import numpy as np
from scipy import stats

from .chain import CEMETERY
from .errors import DomainError, EmptyDistribution, TooLarge
from .linops import green_on
from .rng import stream

MAX_ORACLE_ENTRIES = 10**7
MAX_ORACLE_HORIZON = 25
PRUNE_BELOW = 1e-15
CHI2_ALPHA = 1e-3
KS_ALPHA = 1e-3
OTHER = "<other>"


@dataclass(frozen=True)
class OracleMeasure:
    entries: dict
    horizon: int
    tail_bound: float

    @property
    def total(self):
        return sum(self.entries.values())


def brute_force_paths(chain, start, horizon, predicate="exit", domain=None, max_entries=MAX_ORACLE_ENTRIES):
    """Exact weights of every path from ``start`` of length <= ``horizon`` matching ``predicate``.

    Parameters
    ----------
    chain : ChainSpec
    start : state id
    horizon : int
        Maximum path length, at most 25.
    predicate : {"exit", "first_return", "loop"} or callable
        ``"exit"`` keeps paths that leave the domain on their last step (to
        the boundary or the cemetery); ``"first_return"`` keeps nontrivial
        loops at ``start`` that return only at the end; ``"loop"`` keeps all
        loops at ``start`` including the trivial one.  A callable receives
        each path staying in the domain (possibly leaving on its last step).
    domain : iterable, optional
        Defaults to the interior.

    Returns
    -------
    OracleMeasure
        ``tail_bound`` bounds the total weight of matching paths that were
        omitted, whether longer than ``horizon`` or pruned.
    """
    if not 0 <= horizon <= MAX_ORACLE_HORIZON:
        raise TooLarge(f"horizon must lie in [0, {MAX_ORACLE_HORIZON}]")
    domain = list(chain.interior) if domain is None else list(domain)
    inside = set(domain)
    if start not in inside:
        raise DomainError(f"{start!r} is not in the domain")
    mode = predicate if isinstance(predicate, str) else "custom"
    if mode not in ("exit", "first_return", "loop", "custom"):
        raise DomainError(f"unknown predicate {predicate!r}")

    succ = {}
    for v in domain:
        row = dict(chain.successors(v))
        deficit = 1.0 - sum(row.values())
        if deficit > 1e-15:
            row[CEMETERY] = deficit
        succ[v] = list(row.items())

    # bound on the total weight of all continuations from a vertex
    G = green_on(chain, domain)
    reach = dict(zip(domain, G.sum(axis=1))) if len(domain) else {}
    entries = {}
    tail = 0.0

    def keep(path):
        if mode == "exit":
            return path[-1] not in inside
        if mode == "first_return":
            return len(path) > 1 and path[-1] == start
        if mode == "loop":
            return path[-1] == start
        return bool(predicate(path))

    def omitted(path, w):
        # weight of matching extensions of an unfinished path
        if mode in ("exit", "first_return"):
            return w
        return w * reach[path[-1]]

    stack = [((start,), 1.0)]
    while stack:
        path, w = stack.pop()
        if keep(path):
            entries[path] = w
            if len(entries) > max_entries:
                raise TooLarge("oracle entry guard exceeded")
        last = path[-1]
        if last not in inside or (mode == "first_return" and len(path) > 1 and last == start):
            continue
        if len(path) - 1 == horizon:
            if mode != "loop":
                tail += omitted(path, w)
            continue
        for y, q in succ[last]:
            wq = w * q
            if wq < PRUNE_BELOW:
                tail += omitted(path + (y,), wq) if y in inside else wq
                continue
            stack.append((path + (y,), wq))

    if mode == "loop":
        pos = [domain.index(start)]
        P_D = np.array([[chain.weight(a, b) for b in domain] for a in domain])
        M = np.linalg.matrix_power(P_D, horizon + 1)
        tail += float((M @ G)[pos[0], pos[0]])
    return OracleMeasure(entries, horizon, float(tail))


@dataclass(frozen=True)
class EmpiricalDist:
    counts: Counter
    N: int
    seed: int

    def freq(self, key):
        return self.counts.get(key, 0) / self.N

    def probabilities(self):
        return {k: c / self.N for k, c in self.counts.items()}


def _workers():
    try:
        return max(1, int(os.environ.get("LOOPWORKS_THREADS", "1")))
    except ValueError:
        return 1


def empirical(sampler, N, seed, key=None, shards=1):
    """Tally ``N`` independent draws of ``sampler(rng)``.

    The draws are split into ``shards`` contiguous blocks, block ``i`` using
    the stream ``(seed, i)``.  Blocks may run on up to ``LOOPWORKS_THREADS``
    threads; counts are merged in block order, so the result depends only on
    ``(seed, N, shards)``.
    """
    if N <= 0:
        raise DomainError("N must be positive")
    shards = max(1, min(int(shards), N))
    sizes = [N // shards + (i < N % shards) for i in range(shards)]

    def run(i):
        rng = stream(seed, i)
        c = Counter()
        for _ in range(sizes[i]):
            out = sampler(rng)
            c[out if key is None else key(out)] += 1
        return c

    workers = min(_workers(), shards)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(shards)))
    else:
        parts = [run(i) for i in range(shards)]
    total = Counter()
    for c in parts:
        total.update(c)
    return EmpiricalDist(total, N, seed)


@dataclass(frozen=True)
class CheckResult:
    check: str
    statistic: float
    threshold: float
    passed: bool
    N: int = 0
    seed: int = None
    p_value: float = None

    def to_dict(self):
        out = {
            "check": self.check,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "pass": self.passed,
            "N": self.N,
            "seed": self.seed,
        }
        if self.p_value is not None:
            out["p_value"] = self.p_value
        return out

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        if self.p_value is not None:
            return f"{status} {self.check}: statistic={self.statistic:.6g} p={self.p_value:.4g} (pass above {self.threshold:g})"
        return f"{status} {self.check}: statistic={self.statistic:.6g} threshold={self.threshold:.6g}"


def tv_threshold(N):
    return max(0.01, 5.0 / sqrt(N))


def _aligned(emp, exact):
    exact = {k: float(v) for k, v in exact.items()}
    if not exact or emp.N <= 0:
        raise EmptyDistribution("nothing to compare")
    other_p = max(0.0, 1.0 - sum(exact.values()))
    other_c = sum(c for k, c in emp.counts.items() if k not in exact)
    keys = list(exact)
    p = [exact[k] for k in keys]
    c = [emp.counts.get(k, 0) for k in keys]
    if other_c or other_p > 1e-12:
        keys.append(OTHER)
        p.append(other_p)
        c.append(other_c)
    return keys, np.array(p), np.array(c, dtype=float)


def total_variation(emp, exact):
    _, p, c = _aligned(emp, exact)
    return 0.5 * float(np.abs(c / emp.N - p).sum())


def chi_square(emp, exact, min_expected=5.0):
    """Pearson statistic and p-value after pooling cells with expected count below ``min_expected``."""
    _, p, c = _aligned(emp, exact)
    e = p * emp.N
    order = np.argsort(e)
    e, c = e[order], c[order]
    small = e < min_expected
    cells_e = list(e[~small])
    cells_c = list(c[~small])
    if small.any():
        pe, pc = float(e[small].sum()), float(c[small].sum())
        if pe >= min_expected or not cells_e:
            cells_e.append(pe)
            cells_c.append(pc)
        else:
            cells_e[0] += pe
            cells_c[0] += pc
    cells_e, cells_c = np.array(cells_e), np.array(cells_c)
    if np.any((cells_e == 0) & (cells_c > 0)):
        return float("inf"), 0.0
    if len(cells_e) < 2:
        return 0.0, 1.0
    stat = float(((cells_c - cells_e) ** 2 / cells_e).sum())
    return stat, float(stats.chi2.sf(stat, len(cells_e) - 1))


def compare(emp, exact, method="TV", threshold=None, name="compare"):
    """Goodness of fit of an empirical distribution against an exact law.

    Parameters
    ----------
    emp : EmpiricalDist or sequence of floats
        Counts for ``"TV"`` and ``"chi-square"``; raw real-valued draws for
        ``"KS"``.
    exact : mapping or callable
        Probabilities over outcome keys (missing mass becomes an ``other``
        cell), or a CDF for ``"KS"``.
    method : {"TV", "chi-square", "KS"}
    threshold : float, optional
        TV passes below ``max(0.01, 5/sqrt(N))`` by default; chi-square and KS
        pass when the p-value exceeds 0.001.
    """
    method = method.upper().replace("_", "-")
    if method == "KS":
        x = np.asarray(emp, dtype=float)
        if x.size == 0:
            raise EmptyDistribution("no samples")
        res = stats.kstest(x, exact)
        thr = KS_ALPHA if threshold is None else threshold
        return CheckResult(name, float(res.statistic), thr, bool(res.pvalue > thr), int(x.size), None, float(res.pvalue))
    if method == "TV":
        stat = total_variation(emp, exact)
        thr = tv_threshold(emp.N) if threshold is None else threshold
        return CheckResult(name, stat, thr, bool(stat < thr), emp.N, emp.seed)
    if method in ("CHI-SQUARE", "CHI2", "CHISQUARE"):
        stat, pval = chi_square(emp, exact)
        thr = CHI2_ALPHA if threshold is None else threshold
        return CheckResult(name, stat, thr, bool(pval > thr), emp.N, emp.seed, pval)
    raise DomainError(f"unknown method {method!r}")


def within(name, value, target, tol, relative=False, N=0, seed=None):
    """Deterministic tolerance check packaged as a :class:`CheckResult`."""
    err = abs(value - target)
    if relative:
        err /= max(abs(target), 1e-300)
    return CheckResult(name, float(err), float(tol), bool(err < tol), N, seed)


def sample_nb_by_jumps(t, f, rng):
    """Elementary-loop count at time ``t`` from the jump process.

    Jumps of size ``k`` arrive at rate ``f^k / k``: a Poisson number of
    arrivals with total rate ``-log(1 - f)``, each of logarithmic size.
    """
    if f <= 0:
        return 0
    n = rng.poisson(-t * log(1.0 - f))
    return int(rng.logseries(f, size=n).sum()) if n else 0
