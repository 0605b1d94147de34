import pytest

from loopworks.chain import CEMETERY, build_binary_tree_chain, build_chain
from loopworks.errors import DeadEnd, DomainError, NotExitSaw, TooLarge
from loopworks.fixtures import acyclic_chain, chain_fixtures, grid_chain
from loopworks.harness import brute_force_paths, compare, empirical
from loopworks.lerw import (
    decorate_with_loops,
    enumerate_lerw,
    laplacian_walk_path_prob,
    laplacian_walk_step,
    lerw_prob,
    sample_erased_loops,
    sample_laplacian_walk,
    sample_lerw,
)
from loopworks.linops import poisson_kernel
from loopworks.paths import path_weight, reassemble

N = 10**5


def test_lerw_prob_examples(d3):
    assert lerw_prob(d3, (1, 3)) == pytest.approx(5 / 7, abs=1e-12)
    assert lerw_prob(d3, (1, 2, 3)) == pytest.approx(2 / 7, abs=1e-12)
    assert lerw_prob(d3, (2, 3)) == pytest.approx(4 / 7, abs=1e-12)
    with pytest.raises(NotExitSaw):
        lerw_prob(d3, (1, 2, 1, 3))
    with pytest.raises(NotExitSaw):
        lerw_prob(d3, (1, 2))


def test_enumerate_examples(d3):
    assert enumerate_lerw(d3, 1).entries == pytest.approx({(1, 3): 5 / 7, (1, 2, 3): 2 / 7}, abs=1e-12)
    assert enumerate_lerw(d3, 2).entries == pytest.approx({(2, 3): 4 / 7, (2, 1, 3): 3 / 7}, abs=1e-12)


def test_enumerate_guard():
    with pytest.raises(TooLarge):
        enumerate_lerw(build_binary_tree_chain(5), "")


@pytest.mark.parametrize("name", sorted(chain_fixtures()))
def test_enumeration_normalization(name):
    chain = chain_fixtures()[name]
    if len(chain.interior) > 8:
        pytest.skip()
    H = poisson_kernel(chain)
    for x in chain.interior:
        totals = enumerate_lerw(chain, x).exit_totals()
        for z in chain.boundary_order:
            assert abs(totals[z] - H(x, z)) < 1e-10


def test_lerw_sampler_vs_enumeration(d3):
    for chain, x in ((d3, 1), (grid_chain(2, 2), "i11")):
        exact = enumerate_lerw(chain, x).entries
        emp = empirical(lambda r: sample_lerw(chain, x, r)[0], N, 7)
        assert compare(emp, exact, "TV", threshold=0.01).passed


def test_lerw_on_acyclic_chain(rng):
    c = acyclic_chain()
    # no loop closes, so the erased path is the walk itself
    for _ in range(200):
        eta, z = sample_lerw(c, 1, rng)
        assert eta in ((1, 2, 3), (1, CEMETERY), (1, 2, CEMETERY))
        assert eta[-1] == z


def test_laplacian_step_examples(d3):
    assert laplacian_walk_step(d3, (1,), [3]) == pytest.approx({3: 5 / 7, 2: 2 / 7}, abs=1e-12)
    assert laplacian_walk_step(d3, (1, 2), [3]) == pytest.approx({3: 1.0})
    with pytest.raises(DomainError):
        laplacian_walk_step(d3, (1, 3))


def test_laplacian_walk_dead_end():
    c = build_chain(["a", "b", "z"], ["z"], {("a", "b"): 1.0, ("b", "a"): 0.5, ("b", "z"): 0.5})
    with pytest.raises(DeadEnd):
        laplacian_walk_step(c, ("b", "a"))


@pytest.mark.parametrize("name", ["d3", "grid2x2", "cycle6", "random5"])
def test_laplacian_walk_equals_lerw(name):
    chain = chain_fixtures()[name]
    H = poisson_kernel(chain)
    for x in chain.interior:
        for eta in enumerate_lerw(chain, x).entries:
            total = sum(H(x, z) for z in chain.boundary_order)
            assert abs(laplacian_walk_path_prob(chain, eta) - lerw_prob(chain, eta) / total) < 1e-9


def test_conditioned_laplacian_walk(cycle4, rng):
    # conditioned on exiting at 0 from 1, the walk steps straight there
    assert laplacian_walk_path_prob(cycle4, (1, 0), targets=[0]) == pytest.approx(1.0)
    eta = sample_laplacian_walk(cycle4, 1, rng, targets=[2])
    assert eta == (1, 2)


def test_sample_laplacian_walk_law(d3):
    exact = enumerate_lerw(d3, 2).entries
    emp = empirical(lambda r: sample_laplacian_walk(d3, 2, r), 20_000, 8)
    assert compare(emp, exact, "TV").passed


def test_erased_loops_shape(d3, rng):
    for _ in range(500):
        eta = sample_lerw(d3, 2, rng)[0]
        loops = sample_erased_loops(d3, eta, rng)
        assert len(loops) == len(eta) - 1
        removed = set()
        for v, l in zip(eta, loops):
            assert l[0] == l[-1] == v and not removed & set(l)
            removed.add(v)


def test_decorate_identity_on_acyclic(rng):
    assert decorate_with_loops(acyclic_chain(), (1, 2, 3), rng) == (1, 2, 3)


def test_decorated_path_law(d3):
    exact = brute_force_paths(d3, 1, 6, "exit").entries
    keep = lambda p: p if len(p) <= 7 else "long"
    emp = empirical(lambda r: keep(decorate_with_loops(d3, sample_lerw(d3, 1, r)[0], r)), N, 9)
    assert compare(emp, exact, "TV", threshold=0.015).passed


def test_decorated_weight_identity(d3, rng):
    for _ in range(300):
        eta = sample_lerw(d3, 1, rng)[0]
        loops = sample_erased_loops(d3, eta, rng)
        w = reassemble(eta, loops)
        prod = path_weight(d3, eta)
        for l in loops:
            prod *= path_weight(d3, l)
        assert path_weight(d3, w) == pytest.approx(prod, rel=1e-12)
