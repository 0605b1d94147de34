"""The acceptance checks, each returning a list of :class:`CheckResult`.

``run_acceptance`` executes all of them under one master seed; sampling
checks draw from child seeds derived from it, so a run replays exactly.
"""

from collections import Counter
from itertools import combinations, permutations
from math import log, pi, sqrt

import networkx as nx
import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .chain import (
    Recurrence,
    build_binary_tree_chain,
    classify_nn_walk,
    competing_clocks,
    nn_walk_return_prob,
    sample_ctmc_jump,
    sample_exit_path,
)
from .fixtures import chain_fixtures, d3_chain, graph_fixtures, grid_chain
from .harness import CheckResult, brute_force_paths, compare, empirical, within
from .lerw import decorate_with_loops, enumerate_lerw, laplacian_walk_path_prob, lerw_prob, sample_lerw
from .linops import f_v, f_v_det_ratio, green_column, greens_bundle, induced_chain, poisson_kernel
from .rng import DEFAULT_SEED, derive_seed, stream
from .soup import (
    Flavor,
    TruncatedRootedSoup,
    elementary_mass,
    enumerate_rooted_loops,
    growing_loop_log_pmf,
    growing_loop_pmf,
    measure_total,
    sample_rooted_soup,
    sample_unrooted_soup,
    site_visit_stats,
)
from .ust import count_spanning_trees, enumerate_spanning_trees, grid_graph, wilson_ust

N_DEFAULT = 10**5


def criterion_1(seed=DEFAULT_SEED):
    """Closed forms of the three-state example, exact to 1e-12."""
    c = d3_chain()
    tol = 1e-12
    G = greens_bundle(c)
    out = [
        within("f_1", elementary_mass(c, 1), 8 / 15, tol),
        within("f_2", elementary_mass(c, 2), 5 / 12, tol),
        within("G(1,1)", G.entry(1, 1), 15 / 7, tol),
        within("G(2,2)", G.entry(2, 2), 12 / 7, tol),
        within("P{l_1 = [1]}", growing_loop_pmf(c, 1, 1, (1,)), 7 / 15, tol),
        within("P{l_1 = [2]}", growing_loop_pmf(c, 2, 1, (2,)), 7 / 12, tol),
        within("P{|l_1| = 2} at 1", growing_loop_pmf(c, 1, 1, (1, 1, 1)) + growing_loop_pmf(c, 1, 1, (1, 2, 1)), 7 / 54, tol),
        within("P{|l_1| = 2} at 2", growing_loop_pmf(c, 2, 1, (2, 2, 2)) + growing_loop_pmf(c, 2, 1, (2, 1, 2)), 49 / 432, tol),
    ]
    for t in (0.5, 1.0, 2.0):
        visit, count = site_visit_stats(c, 1, 2, t)
        out.append(within(f"visit prob t={t}", visit, 1 - 0.7**t, tol))
        out.append(within(f"expected count t={t}", count, 18 / 35 * t, tol))
    return out


def length_two_ratio(chain, x, t):
    """``P{l_t = [x, x, x]} / P{|l_t| = 2}`` for the growing loop at ``x``."""
    # log space: both probabilities underflow for large t
    others = [y for y in chain.interior if y != x]
    own = growing_loop_log_pmf(chain, x, t, (x, x, x))
    logs = np.array([own] + [growing_loop_log_pmf(chain, x, t, (x, y, x)) for y in others])
    return float(np.exp(own - logsumexp(logs)))


def criterion_2(seed=DEFAULT_SEED):
    """Small-time and large-time limits of the length-two ratio."""
    c = d3_chain()
    out = []
    for x in (1, 2):
        out.append(within(f"ratio x={x} t=1e-4 vs 1/4", length_two_ratio(c, x, 1e-4), 0.25, 0.01))
        out.append(within(f"ratio x={x} t=200 vs 1", length_two_ratio(c, x, 200.0), 1.0, 0.01))
    return out


def criterion_3(seed=DEFAULT_SEED, N=N_DEFAULT):
    """Exact LERW law on the three-state chain, and the sampler against it."""
    c = d3_chain()
    H = poisson_kernel(c)
    expected = {1: {(1, 3): 5 / 7, (1, 2, 3): 2 / 7}, 2: {(2, 3): 4 / 7, (2, 1, 3): 3 / 7}}
    out = []
    for x, law in expected.items():
        dist = enumerate_lerw(c, x)
        err = max(abs(dist.entries.get(k, 0.0) - v) for k, v in law.items())
        err = max(err, abs(len(dist.entries) - len(law)))
        out.append(within(f"enumerate_lerw from {x}", err, 0.0, 1e-10))
        err = max(abs(v - H(x, z)) for z, v in dist.exit_totals().items())
        out.append(within(f"LERW totals vs Poisson kernel from {x}", err, 0.0, 1e-10))
        s = derive_seed(seed, 3, x)
        emp = empirical(lambda rng: sample_lerw(c, x, rng)[0], N, s)
        res = compare(emp, law, "TV", threshold=0.01, name=f"LERW sampler from {x} (TV)")
        out.append(res)
    return out


def criterion_4(seed=DEFAULT_SEED):
    """Sequential Laplacian-walk step products equal the exact LERW law."""
    out = []
    for name, chain in (("d3", d3_chain()), ("grid2x2", grid_chain(2, 2))):
        err = 0.0
        for x in chain.interior:
            for eta in enumerate_lerw(chain, x).entries:
                err = max(err, abs(laplacian_walk_path_prob(chain, eta) - lerw_prob(chain, eta)))
        out.append(within(f"Laplacian walk = LERW on {name}", err, 0.0, 1e-9))
    return out


def criterion_5(seed=DEFAULT_SEED, N=N_DEFAULT, max_len=6):
    """Loop-decorated LERW paths follow the exit-path law."""
    c = d3_chain()
    out = []
    for x in c.interior:
        exact = {p: w for p, w in brute_force_paths(c, x, max_len, "exit").entries.items()}
        keep = lambda path: path if len(path) - 1 <= max_len else "<long>"
        s = derive_seed(seed, 5, x)
        emp = empirical(lambda rng: keep(decorate_with_loops(c, sample_lerw(c, x, rng)[0], rng)), N, s)
        out.append(compare(emp, exact, "TV", threshold=0.015, name=f"decorated LERW vs exit paths from {x} (TV)"))
        s = derive_seed(seed, 5, x, 1)
        emp = empirical(lambda rng: keep(sample_exit_path(c, x, rng).path), N, s)
        out.append(compare(emp, exact, "TV", threshold=0.015, name=f"direct exit paths from {x} (TV)"))
    return out


def criterion_6(seed=DEFAULT_SEED):
    """Matrix-tree counts against enumeration and the complete-graph formula."""
    out = []
    for name, g in graph_fixtures().items():
        if g.number_of_nodes() <= 8:
            out.append(within(f"tree count {name}", count_spanning_trees(g), len(enumerate_spanning_trees(g)), 0.5))
    for n1 in range(2, 8):
        out.append(within(f"tree count K{n1} = {n1}^{n1 - 2}", count_spanning_trees(nx.complete_graph(n1)), n1 ** (n1 - 2), 0.5))
    return out


def criterion_7(seed=DEFAULT_SEED, N=N_DEFAULT):
    """Wilson's algorithm is uniform whatever the vertex ordering."""
    out = []
    for name, g in (("K4", nx.complete_graph(4)), ("grid2x3", grid_graph(2, 3))):
        trees = enumerate_spanning_trees(g)
        root = next(iter(g.nodes))
        others = [v for v in g.nodes if v != root]
        uniform = {t.edges: 1 / len(trees) for t in trees}
        for k, ordering in enumerate((others, others[::-1])):
            s = derive_seed(seed, 7, len(trees), k)
            emp = empirical(lambda rng: wilson_ust(g, root, ordering, rng).edges, N, s)
            out.append(compare(emp, uniform, "chi-square", name=f"Wilson {name} ({len(trees)} trees) ordering {k}"))
    return out


def _subsets(items, max_size):
    for k in range(1, min(max_size, len(items)) + 1):
        yield from combinations(items, k)


def criterion_8(seed=DEFAULT_SEED, max_size=5):
    """F_V is symmetric in the order of V and equals a determinant ratio."""
    worst_perm = 0.0
    worst_ratio = 0.0
    for chain in chain_fixtures().values():
        for V in _subsets(chain.interior, max_size):
            base = f_v(chain, V)
            for order in permutations(V):
                worst_perm = max(worst_perm, abs(f_v(chain, V, order) - base) / base)
            worst_ratio = max(worst_ratio, abs(f_v_det_ratio(chain, V) - base) / base)
    return [
        within("F_V permutation invariance (relative)", worst_perm, 0.0, 1e-10),
        within("F_V determinant ratio (relative)", worst_ratio, 0.0, 1e-9),
    ]


def criterion_9(seed=DEFAULT_SEED):
    """The induced chain's Green's function is the restriction of G_A."""
    worst = 0.0
    for chain in chain_fixtures().values():
        G = greens_bundle(chain)
        pos = {s: k for k, s in enumerate(chain.interior)}
        for V in _subsets(chain.interior, len(chain.interior)):
            ind = induced_chain(chain, V)
            k = [pos[s] for s in ind.V]
            worst = max(worst, float(np.abs(ind.G_tilde - G.G_A[np.ix_(k, k)]).max()))
    return [within("induced chain Green's function", worst, 0.0, 1e-10)]


def criterion_10(seed=DEFAULT_SEED, N=N_DEFAULT):
    """Loop-measure totals and the empty-soup probability."""
    c = d3_chain()
    target = log(18 / 7)
    out = []
    for flavor in Flavor:
        total = measure_total(c, flavor, 20, ordering=(1, 2)).partial
        out.append(within(f"{flavor.value} measure total (len 20) vs log(18/7)", total, target, 1e-4))
    for t in (0.5, 1.0, 2.0):
        s = derive_seed(seed, 10, int(t * 2))
        emp = empirical(lambda rng: sample_rooted_soup(c, t, rng).is_empty(), N, s)
        out.append(within(f"P{{empty soup}} t={t} vs (7/18)^t", emp.freq(True), (7 / 18) ** t, 0.01, N=N, seed=s))
    return out


def _intensity_check(name, a, b, classes, N, seed):
    """Largest z-score between two families of per-class Poisson counts."""
    worst = 0.0
    for key in classes:
        x = np.array([r.get(key, 0) for r in a], dtype=float)
        y = np.array([r.get(key, 0) for r in b], dtype=float)
        se = sqrt(x.var() / len(x) + y.var() / len(y))
        if se == 0:
            z = 0.0 if x.mean() == y.mean() else float("inf")
        else:
            z = abs(x.mean() - y.mean()) / se
        worst = max(worst, z)
    return CheckResult(name, worst, 3.0, bool(worst < 3.0), N, seed)


def criterion_11(seed=DEFAULT_SEED, N=N_DEFAULT, t=1.0, max_class_len=3):
    """Rooted soup from growing loops vs a direct Poisson sampler; unrooted soup vs ordering."""
    c = d3_chain()
    direct = TruncatedRootedSoup(c, max_len=10)
    s1, s2 = derive_seed(seed, 11, 1), derive_seed(seed, 11, 2)
    rng = stream(s1)
    a = [sample_rooted_soup(c, t, rng).loops for _ in range(N)]
    rng = stream(s2)
    b = [direct.sample(t, rng).loops for _ in range(N)]
    classes = sorted(enumerate_rooted_loops(c, max_class_len), key=lambda l: (len(l), l))
    out = [_intensity_check("rooted intensities: growing loops vs direct Poisson", a, b, classes, N, s1)]

    s3, s4 = derive_seed(seed, 11, 3), derive_seed(seed, 11, 4)
    rng = stream(s3)
    u1 = [sample_unrooted_soup(c, t, rng, ordering=(1, 2)).loops for _ in range(N)]
    rng = stream(s4)
    u2 = [sample_unrooted_soup(c, t, rng, ordering=(2, 1)).loops for _ in range(N)]
    ukeys = sorted({k for r in u1[:2000] + u2[:2000] for k in r if k.length <= max_class_len}, key=lambda k: (k.length, k.canonical))
    out.append(_intensity_check("unrooted intensities: ordering (1,2) vs (2,1)", u1, u2, ukeys, N, s3))
    return out


def criterion_12(seed=DEFAULT_SEED, depth=12):
    """Green's function of the truncated binary tree walk."""
    chain = build_binary_tree_chain(depth)
    col_root = green_column(chain, "")
    out = [within("G(root, root)", col_root[""], 2.0, 0.01)]
    words = [""]
    for _ in range(3):
        words = [w + ch for w in words for ch in "01"]
        for b in words:
            out.append(within(f"G({b}, root)", col_root[b], 2.0 * 2.0 ** -len(b), 0.01))
            out.append(within(f"G(root, {b})", green_column(chain, b)[""], 3.0 * 2.0 ** -len(b), 0.01))
    return out


def criterion_13(seed=DEFAULT_SEED, m=10**4):
    """Return-probability asymptotics and recurrence classification."""
    p = nn_walk_return_prob(0.5, 2 * m)
    out = [within("sqrt(pi m) p_2m at m=1e4", sqrt(pi * m) * p, 1.0, 0.01)]
    for q in (0.5, 0.3, 0.7, 0.51):
        want = Recurrence.RECURRENT if q == 0.5 else Recurrence.TRANSIENT
        got = classify_nn_walk(q)
        out.append(CheckResult(f"classify q={q}", float(got == want), 1.0, got == want))
    return out


def criterion_14(seed=DEFAULT_SEED, N=N_DEFAULT):
    """Continuous-time embedding: exponential holding times and competing clocks."""
    c = d3_chain()
    rates = {1: 2.0, 2: 0.5}
    out = []
    for x, r in rates.items():
        s = derive_seed(seed, 14, x)
        rng = stream(s)
        h = [sample_ctmc_jump(c, rates, x, rng).holding_time for _ in range(N)]
        res = compare(h, stats.expon(scale=1 / r).cdf, "KS", name=f"holding time at {x} ~ Exp({r}) (KS)")
        out.append(res)
    s = derive_seed(seed, 14, 0)
    rng = stream(s)
    draws = [competing_clocks([1.0, 2.0, 3.0], rng) for _ in range(N)]
    times = np.array([d[0] for d in draws])
    fitted = 1.0 / times.mean()
    out.append(within("min of rates 1,2,3: fitted rate vs 6 (relative)", fitted, 6.0, 0.02, relative=True, N=N, seed=s))
    out.append(compare(times, stats.expon(scale=1 / 6).cdf, "KS", name="min of rates 1,2,3 ~ Exp(6) (KS)"))
    winners = Counter(d[1] for d in draws)
    emp_w = {k: v / N for k, v in winners.items()}
    out.append(within("winner law P{clock 3 first} vs 1/2", emp_w.get(2, 0.0), 0.5, 0.01, N=N, seed=s))
    return out


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 15)}


def run_acceptance(seed=DEFAULT_SEED, criteria=None):
    """Run the selected criteria (all by default); ``{number: [CheckResult]}``."""
    keys = sorted(CRITERIA) if criteria is None else list(criteria)
    return {k: CRITERIA[k](seed) for k in keys}
