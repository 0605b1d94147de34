from collections import Counter
from itertools import product
from math import log

import numpy as np
import pytest
from scipy.stats import poisson
from hypothesis import given, settings
from hypothesis import strategies as st

from loopworks.acceptance import length_two_ratio
from loopworks.errors import DomainError, DomainMismatch, TooLarge, TrivialLoop, ZeroMass
from loopworks.fixtures import D3_DET_G, acyclic_chain, chain_fixtures, grid_chain
from loopworks.harness import compare, empirical, sample_nb_by_jumps
from loopworks.linops import green_on
from loopworks.paths import canonical_unrooted, loop_stats
from loopworks.rng import stream
from loopworks.soup import (
    Flavor,
    TruncatedRootedSoup,
    chinese_restaurant_blocks,
    config_pmf,
    elementary_mass,
    empty_soup_prob,
    enumerate_rooted_loops,
    enumerate_unrooted_loops,
    growing_loop_pmf,
    loop_measure,
    measure_total,
    negative_binomial_pmf,
    sample_elementary_loop,
    sample_growing_loop,
    sample_negative_binomial,
    sample_rooted_soup,
    sample_soup_config,
    sample_unrooted_soup,
    site_visit_stats,
)

LOG_DET = log(float(D3_DET_G))


def _z(mean, expected, var, n):
    return abs(mean - expected) / np.sqrt(max(var, 1e-300) / n)


# elementary loops and growing loops


def test_elementary_mass_examples(d3):
    assert elementary_mass(d3, 1) == pytest.approx(8 / 15, abs=1e-12)
    assert elementary_mass(d3, 2) == pytest.approx(5 / 12, abs=1e-12)
    assert elementary_mass(d3, 2, [2]) == pytest.approx(1 / 6, abs=1e-12)
    assert elementary_mass(acyclic_chain(), 1) == pytest.approx(0.0, abs=1e-15)


def test_elementary_loop_zero_mass(rng):
    with pytest.raises(ZeroMass):
        sample_elementary_loop(acyclic_chain(), 1, rng)


def test_elementary_loop_law(d3):
    emp = empirical(lambda r: sample_elementary_loop(d3, 1, r), 50_000, 31)
    assert emp.freq((1, 1)) == pytest.approx(5 / 8, abs=0.01)
    assert emp.freq((1, 2, 1)) == pytest.approx(5 / 16, abs=0.01)
    exact = {l: p / (8 / 15) for l, p in enumerate_rooted_loops(d3, 12, roots=[1]).items() if l.count(1) == 2}
    assert compare(emp, exact, "chi-square").passed


def test_trivial_loop_probabilities(d3):
    for x, target in ((1, 7 / 15), (2, 7 / 12)):
        assert growing_loop_pmf(d3, x, 1.0, (x,)) == pytest.approx(target, abs=1e-12)
        emp = empirical(lambda r: sample_growing_loop(d3, x, 1.0, r).K, 40_000, 32 + x)
        assert emp.freq(0) == pytest.approx(target, abs=0.01)


def test_growing_loop_pmf_example(d3):
    assert growing_loop_pmf(d3, 1, 1.0, (1, 2, 1)) == pytest.approx(7 / 90, abs=1e-12)
    with pytest.raises(DomainError):
        growing_loop_pmf(d3, 1, 0.0, (1,))


@pytest.mark.parametrize("t", [0.5, 1.0, 2.5])
def test_growing_loop_law(d3, t):
    keep = lambda s: s.loop if len(s.loop) <= 7 else "long"
    emp = empirical(lambda r: keep(sample_growing_loop(d3, 1, t, r)), 50_000, 40)
    exact = {(1,): growing_loop_pmf(d3, 1, t, (1,))}
    for l in enumerate_rooted_loops(d3, 6, roots=[1]):
        exact[l] = growing_loop_pmf(d3, 1, t, l)
    assert compare(emp, exact, "chi-square").passed


def test_growing_loop_structure(d3, rng):
    for _ in range(300):
        s = sample_growing_loop(d3, 1, 1.7, rng)
        assert s.loop.count(1) == s.K + 1
        assert sum(len(e) - 1 for e in s.events) == len(s.loop) - 1
        assert all(e[0] == e[-1] == 1 for e in s.events)


@pytest.mark.parametrize("t", [0.3, 1.0, 4.0])
def test_negative_binomial_sampler(t):
    f = 8 / 15
    emp = empirical(lambda r: sample_negative_binomial(t, f, r), 50_000, 41)
    exact = {k: negative_binomial_pmf(k, t, f) for k in range(200)}
    assert compare(emp, exact, "chi-square").passed


@pytest.mark.parametrize("t", [0.3, 2.0])
def test_negative_binomial_matches_jump_process(t):
    f = 5 / 12
    emp = empirical(lambda r: sample_nb_by_jumps(t, f, r), 50_000, 42)
    exact = {k: negative_binomial_pmf(k, t, f) for k in range(200)}
    assert compare(emp, exact, "chi-square").passed


def test_negative_binomial_pmf_sums_to_one():
    for t, f in ((0.1, 0.9), (1.0, 0.5), (7.0, 0.2)):
        assert sum(negative_binomial_pmf(k, t, f) for k in range(2000)) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=100)
@given(st.integers(0, 40), st.floats(0.05, 10.0), st.integers(0, 2**32 - 1))
def test_chinese_restaurant_blocks(K, theta, seed):
    sizes = chinese_restaurant_blocks(K, theta, np.random.default_rng(seed))
    assert sum(sizes) == K and all(s >= 1 for s in sizes)


def test_chinese_restaurant_block_count():
    theta, K = 1.5, 10
    emp = empirical(lambda r: len(chinese_restaurant_blocks(K, theta, r)), 40_000, 43)
    mean = sum(k * c for k, c in emp.counts.items()) / emp.N
    assert mean == pytest.approx(sum(theta / (theta + i) for i in range(K)), abs=0.03)


# ratio limits of the length-two loops


@pytest.mark.parametrize("t", [1e-4, 0.5, 1.0, 200.0])
def test_length_two_ratio_closed_form(d3, t):
    assert length_two_ratio(d3, 1, t) == pytest.approx(1 / (1 + 3 / (t + 1)), rel=1e-12)
    assert length_two_ratio(d3, 2, t) == pytest.approx(1 / (1 + 12 / (t + 1)), rel=1e-12)


def test_length_two_ratio_limits(d3):
    assert length_two_ratio(d3, 1, 1e-9) == pytest.approx(1 / 4, abs=1e-8)
    assert length_two_ratio(d3, 2, 1e-9) == pytest.approx(1 / 13, abs=1e-8)
    assert length_two_ratio(d3, 1, 1e7) == pytest.approx(1.0, abs=1e-6)
    assert length_two_ratio(d3, 2, 1e7) == pytest.approx(1.0, abs=1e-5)


# ordered configurations


def test_all_trivial_probability(d3):
    assert config_pmf(d3, [1, 2], 1.0, [(1,), (2,)]) == pytest.approx(7 / 18, abs=1e-12)
    emp = empirical(lambda r: sample_soup_config(d3, [1, 2], 1.0, r).is_empty(), 40_000, 44)
    assert emp.freq(True) == pytest.approx(7 / 18, abs=0.01)


def test_config_pmf_errors(d3):
    with pytest.raises(DomainMismatch):
        config_pmf(d3, [1, 2], 1.0, [(1,)])
    with pytest.raises(DomainMismatch):
        config_pmf(d3, [1, 2], 1.0, [(1,), (2, 1, 2)])
    with pytest.raises(DomainError):
        config_pmf(d3, [1, 1], 1.0, [(1,), (1,)])


def _config_mass(chain, L):
    loops1 = [(1,)] + list(enumerate_rooted_loops(chain, L, roots=[1]))
    loops2 = [(2,)] + list(enumerate_rooted_loops(chain, L, domain=[2]))
    return sum(config_pmf(chain, [1, 2], 1.0, c) for c in product(loops1, loops2))


def _marginal_mass(chain, x, dom, L):
    # at t = 1 the loops of length n carry (P^n)(x, x) / G(x, x)
    pos = [chain.index[s] for s in dom]
    P = chain.P.toarray()[np.ix_(pos, pos)]
    k = dom.index(x)
    G = green_on(chain, dom)
    M = np.eye(len(dom))
    total = 0.0
    for _ in range(L + 1):
        total += M[k, k]
        M = M @ P
    return total / G[k, k]


def test_config_pmf_truncated_sum(d3):
    L = 8
    s = _config_mass(d3, L)
    assert s == pytest.approx(_marginal_mass(d3, 1, [1, 2], L) * _marginal_mass(d3, 2, [2], L), rel=1e-12)
    assert s < 1.0


def test_config_pmf_sum_converges(d3):
    # the configuration law is a product over sites, checked above
    L = 16
    m1 = growing_loop_pmf(d3, 1, 1.0, (1,)) + sum(
        growing_loop_pmf(d3, 1, 1.0, l) for l in enumerate_rooted_loops(d3, L, roots=[1])
    )
    m2 = growing_loop_pmf(d3, 2, 1.0, (2,), [2]) + sum(
        growing_loop_pmf(d3, 2, 1.0, l, [2]) for l in enumerate_rooted_loops(d3, L, domain=[2])
    )
    assert m1 == pytest.approx(_marginal_mass(d3, 1, [1, 2], L), rel=1e-12)
    assert m1 * m2 == pytest.approx(1.0, abs=1e-3)


def test_config_law_by_sampling(d3):
    keep = lambda c: tuple(s.loop for s in c.config) if all(len(s.loop) <= 5 for s in c.config) else "long"
    emp = empirical(lambda r: keep(sample_soup_config(d3, [1, 2], 1.0, r)), 50_000, 45)
    loops1 = [(1,)] + list(enumerate_rooted_loops(d3, 4, roots=[1]))
    loops2 = [(2,)] + list(enumerate_rooted_loops(d3, 4, domain=[2]))
    exact = {c: config_pmf(d3, [1, 2], 1.0, c) for c in product(loops1, loops2)}
    assert compare(emp, exact, "chi-square").passed


# loop measures


def test_loop_measure_examples(d3):
    assert loop_measure(d3, (1, 1), Flavor.ROOTED) == pytest.approx(1 / 3, abs=1e-15)
    assert loop_measure(d3, (1, 2, 1), "rooted") == pytest.approx(1 / 12, abs=1e-15)
    assert loop_measure(d3, (1, 2, 1), "unrooted") == pytest.approx(1 / 6, abs=1e-15)
    assert loop_measure(d3, (1, 2, 1), "ordered") == pytest.approx(1 / 6, abs=1e-15)
    assert loop_measure(d3, (2, 1, 2), "ordered") == 0.0
    assert loop_measure(d3, (2, 1, 2), "ordered", ordering=[2, 1]) == pytest.approx(1 / 6, abs=1e-15)
    assert loop_measure(d3, (3, 3), "rooted") == 0.0
    with pytest.raises(TrivialLoop):
        loop_measure(d3, (1,), "rooted")


@settings(max_examples=200)
@given(st.lists(st.sampled_from(["i11", "i12", "i21", "i22"]), min_size=1, max_size=8))
def test_unrooted_measure_sums_rotations(body):
    chain = grid_chain(2, 2)
    l = tuple(body) + (body[0],)
    s = loop_stats(l)
    rotations = {l[k:-1] + l[:k] + (l[k],) for k in range(s.length)}
    assert len(rotations) == s.J
    rooted = sum(loop_measure(chain, r, "rooted") for r in rotations)
    assert loop_measure(chain, l, "unrooted") == pytest.approx(rooted, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("name", ["d3", "grid2x2", "cycle6", "random5"])
def test_unrooted_enumeration_groups_rooted_loops(name):
    chain = chain_fixtures()[name]
    L = 8
    expected = Counter()
    for l, p in enumerate_rooted_loops(chain, L).items():
        expected[canonical_unrooted(l, chain.index)] += p / (len(l) - 1)
    got = enumerate_unrooted_loops(chain, L)
    assert set(got) == {k for k, v in expected.items() if v > 0}
    for k, v in got.items():
        assert v == pytest.approx(expected[k], rel=1e-10)


@pytest.mark.parametrize("name", ["d3", "grid2x2", "cycle6", "random5"])
def test_measure_totals(name):
    chain = chain_fixtures()[name]
    target = float(np.linalg.slogdet(green_on(chain, list(chain.interior)))[1])
    L = 20 if len(chain.interior) <= 3 else 12
    for flavor in Flavor:
        m = measure_total(chain, flavor, L)
        assert m.partial <= target + 1e-12
        assert target - m.partial <= m.tail_bound + 1e-12
    r = measure_total(chain, "rooted", 10).partial
    assert measure_total(chain, "unrooted", 10).partial == pytest.approx(r, rel=1e-10)


def test_measure_total_per_site(d3):
    m = measure_total(d3, "ordered", 20)
    assert m.per_site[1] == pytest.approx(log(15 / 7), abs=1e-4)
    assert m.per_site[2] == pytest.approx(log(6 / 5), abs=1e-4)
    assert m.partial == pytest.approx(LOG_DET, abs=1e-4)


def test_measure_total_monotone(d3):
    for flavor in Flavor:
        vals = [measure_total(d3, flavor, L).partial for L in range(1, 15)]
        assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


def test_measure_total_guards(d3):
    with pytest.raises(TooLarge):
        measure_total(d3, "unrooted", 21)
    with pytest.raises(TooLarge):
        enumerate_unrooted_loops(grid_chain(2, 2), 13)
    with pytest.raises(DomainError):
        measure_total(d3, "rooted", 0)


# soups


def test_empty_probability_examples(d3):
    assert empty_soup_prob(d3, 1.0) == pytest.approx(7 / 18, abs=1e-15)
    assert empty_soup_prob(d3, 0.0) == 1.0
    assert empty_soup_prob(d3, 2.0) == pytest.approx((7 / 18) ** 2, rel=1e-12)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_rooted_soup_intensities(d3, t):
    n = 40_000
    rng = stream(46)
    counts = {l: np.zeros(n) for l in [(1, 1), (1, 2, 1), (2, 1, 2), (2, 2)]}
    empty = 0
    for i in range(n):
        s = sample_rooted_soup(d3, t, rng)
        empty += s.is_empty()
        for l in counts:
            counts[l][i] = s.loops.get(l, 0)
    for l, c in counts.items():
        assert _z(c.mean(), t * loop_measure(d3, l, "rooted"), c.var(), n) < 4
    assert empty / n == pytest.approx(empty_soup_prob(d3, t), abs=0.01)


def test_rooted_soup_ordering_invariance(d3):
    n = 30_000
    for order in ([1, 2], [2, 1]):
        rng = stream(47)
        c = np.array([sample_rooted_soup(d3, 1.0, rng, order).loops.get((2, 1, 2), 0) for _ in range(n)])
        assert _z(c.mean(), 1 / 12, c.var(), n) < 4


def test_unrooted_soup_intensity(d3):
    n = 40_000
    rng = stream(48)
    key = canonical_unrooted((1, 2, 1))
    c = np.array([sample_unrooted_soup(d3, 1.0, rng).loops.get(key, 0) for _ in range(n)])
    assert _z(c.mean(), 1 / 6, c.var(), n) < 4


def test_truncated_rooted_soup(d3):
    soup = TruncatedRootedSoup(d3, max_len=10)
    t = 1.5
    lam = t * soup.masses.sum()
    emp = empirical(lambda r: soup.sample(t, r).total, 40_000, 49)
    exact = {k: float(poisson.pmf(k, lam)) for k in range(60)}
    assert compare(emp, exact, "chi-square").passed
    assert soup.masses.sum() == pytest.approx(measure_total(d3, "rooted", 10).partial, rel=1e-12)


def test_site_visit_stats(d3):
    t = 1.0
    visit, expected = site_visit_stats(d3, 1, 2, t)
    assert visit == pytest.approx(3 / 10, abs=1e-12)
    n = 60_000
    rng = stream(50)
    counts = np.array([sample_growing_loop(d3, 1, t, rng).loop.count(2) for _ in range(n)])
    assert (counts > 0).mean() == pytest.approx(visit, abs=0.01)
    assert _z(counts.mean(), expected, counts.var(), n) < 4
    assert site_visit_stats(d3, 1, 2, 0.0) == (0.0, 0.0)
    with pytest.raises(DomainError):
        site_visit_stats(d3, 1, 1, 1.0)
