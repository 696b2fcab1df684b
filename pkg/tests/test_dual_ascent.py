import numpy as np
import pytest

from conftest import random_chain, random_model, random_submodular_binary, random_tree_edges
from mrfmap import dp
from mrfmap.consistency import closure, dual_value, epsilon_agreement, mi, round_dual
from mrfmap.dual_ascent import (BACKEND, DiffusionWeights, InvalidWeightsError, chain_counts,
                                diffusion_node_update, diffusion_round_prep, dual, kernels,
                                run_diffusion, run_srmp, srmp_pass, srmp_round, trws_messages)
from mrfmap.harness.bruteforce import brute_force
from mrfmap.harness.generators import frustrated_triangle, icm_trap, constant_chain, grid_edges
from mrfmap.model import GraphicalModel, InvalidModelError, Reparametrization, energy, reparametrize


def connected(rng, n, L, extra=0.3, integer=True):
    edges = set(random_tree_edges(rng, n))
    edges |= {(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < extra}
    return random_model(rng, n, L, sorted(edges), integer=integer)


def star(rng, k=3, L=3):
    return random_model(rng, k + 1, L, [(0, i) for i in range(1, k + 1)], integer=False)


def non_decreasing(xs, slack=1e-9):
    return all(b >= a - slack for a, b in zip(xs, xs[1:]))


# weights

def test_weight_validation(rng):
    m = star(rng)
    with pytest.raises(InvalidWeightsError):
        DiffusionWeights(m, np.full(6, 0.5))
    with pytest.raises(InvalidWeightsError):
        DiffusionWeights(m, -np.ones(6))
    with pytest.raises(InvalidWeightsError):
        DiffusionWeights(m, np.zeros(2))
    with pytest.raises(InvalidWeightsError):
        DiffusionWeights.named(m, "nope")
    assert np.allclose(DiffusionWeights.cmp(m).values[:3], 0.25)


# diffusion node update

def test_minsum_update_post_conditions(rng):
    for _ in range(20):
        m = star(rng)
        phi = Reparametrization(m, rng.normal(size=m.packed.slot_off[-1]))
        before = dual(m, phi)
        diffusion_node_update(m, phi, 0, DiffusionWeights.minsum(m))
        c = reparametrize(m, phi)
        assert np.allclose(c.unary[0], 0.0, atol=1e-12)
        pencils = np.array([c.pairwise[e].min(axis=1) for e in range(3)])
        assert np.allclose(pencils, pencils[0], atol=1e-12)
        assert dual(m, phi) >= before - 1e-9


def test_zero_weights_reach_fixpoint_at_once(rng):
    m = star(rng)
    phi = Reparametrization(m, rng.normal(size=m.packed.slot_off[-1]))
    w = DiffusionWeights.zeros(m)
    diffusion_node_update(m, phi, 0, w)
    c = reparametrize(m, phi)
    assert all(np.allclose(c.pairwise[e].min(axis=1), 0.0) for e in range(3))
    snap = phi.values.copy()
    diffusion_node_update(m, phi, 0, w)
    assert np.allclose(phi.values, snap, atol=1e-12)


def test_chain_weights_are_dynamic_programming(rng):
    for _ in range(30):
        m = random_chain(rng, int(rng.integers(1, 7)), 3)
        w = DiffusionWeights.chains(m)
        assert np.all(np.isin(w.values, [0.0, 1.0]))
        phi, _ = run_diffusion(m, w, iters=1, track_epsilon=False)
        assert dual(m, phi) == pytest.approx(dp.solve_chain(m)[0], abs=1e-9)


# run_diffusion

def test_diffusion_converges_only_in_the_limit():
    m = constant_chain()
    phi, tr = run_diffusion(m, iters=2000, tol=1e-3)
    d = tr.duals
    assert non_decreasing(d)
    assert d[-1] < -5.0 and d[-1] == pytest.approx(-5.0, abs=1e-2)
    assert tr.epsilons[-1] <= 1e-3
    assert all(e > 0 for e in tr.epsilons)


def test_diffusion_noop_on_agreeing_costs(rng):
    m = random_chain(rng, 5, 3)
    phi, _ = run_srmp(m, iters=1, track_epsilon=False)
    mc = GraphicalModel.from_costs(m, reparametrize(m, phi))
    assert epsilon_agreement(mc.costs).epsilon <= 1e-9
    d0 = dual_value(mc)
    _, tr = run_diffusion(mc, iters=5, tol=-1.0)
    assert all(abs(d - d0) <= 1e-9 for d in tr.duals)


def test_diffusion_on_trees_reaches_optimum(rng):
    for _ in range(15):
        n = int(rng.integers(2, 7))
        m = random_model(rng, n, 3, random_tree_edges(rng, n))
        phi, tr = run_diffusion(m, iters=5000, tol=1e-9)
        assert dual(m, phi) == pytest.approx(brute_force(m).energy, abs=1e-6)
        y = round_dual(diffusion_round_prep(m, phi))
        assert energy(m, y) == brute_force(m).energy


def test_round_prep_without_pairwise_costs(rng):
    m = random_model(rng, 3, 2, [(0, 1), (1, 2)])
    m = GraphicalModel(m.labels, m.edges, m.unary, [np.zeros((2, 2))] * 2)
    phi = Reparametrization(m)
    c = diffusion_round_prep(m, phi)
    assert all(np.array_equal(a, b) for a, b in zip(c.unary, m.unary))


def test_round_prep_after_convergence_on_trap():
    m = icm_trap()
    phi, _ = run_diffusion(m, iters=500, tol=1e-10)
    assert round_dual(diffusion_round_prep(m, phi)).tolist() == [0, 0]


def test_diffusion_rejects_big_costs():
    m = constant_chain(high=np.inf)
    with pytest.raises(InvalidModelError):
        run_diffusion(m, iters=1)


# chain counts

def test_chain_counts_examples():
    path = GraphicalModel([2] * 4, [(0, 1), (1, 2), (2, 3)], [np.zeros(2)] * 4,
                          [np.zeros((2, 2))] * 3)
    assert chain_counts(path).tolist() == [1, 1, 1, 1]
    g = grid_edges(3, 3)
    grid = GraphicalModel([2] * 9, g, [np.zeros(2)] * 9, [np.zeros((2, 2))] * len(g))
    assert chain_counts(grid)[4] == 2
    st = GraphicalModel([2] * 5, [(0, k) for k in range(1, 5)], [np.zeros(2)] * 5,
                        [np.zeros((2, 2))] * 4)
    assert chain_counts(st, [1, 2, 3, 4, 0])[0] == 4
    assert chain_counts(st, variant="edges").tolist() == [4, 1, 1, 1, 1]
    with pytest.raises(InvalidModelError):
        chain_counts(st, [0, 1, 2, 3, 3])


# SRMP

def test_srmp_chain_exact_after_one_pass(rng):
    for _ in range(40):
        m = random_chain(rng, int(rng.integers(1, 8)), int(rng.integers(1, 4)))
        phi, tr = run_srmp(m, iters=1, track_epsilon=False)
        assert tr.duals[0] == pytest.approx(brute_force(m).energy, abs=1e-9)
        y = srmp_round(m, phi, tr.meta["last_order"])
        assert energy(m, y) == brute_force(m).energy


def test_srmp_triangle_lp_gap():
    m = frustrated_triangle(1.0)
    phi, tr = run_srmp(m, iters=200, tol=1e-9)
    assert dual(m, phi) == pytest.approx(0.0, abs=1e-9)
    assert brute_force(m).energy == 1.0


def test_srmp_tight_on_submodular(rng):
    for _ in range(15):
        m = random_submodular_binary(rng, int(rng.integers(2, 7)))
        if m.edge_count == 0:
            continue
        phi, _ = run_srmp(m, iters=3000, tol=1e-10)
        assert dual(m, phi) == pytest.approx(brute_force(m).energy, abs=1e-6)


def test_srmp_round_single_node():
    m = GraphicalModel([3], [], [np.array([2.0, 0.0, 1.0])], [])
    assert srmp_round(m, Reparametrization(m)).tolist() == [1]


def test_srmp_round_beats_naive_on_ties():
    # zero unaries, only the two mixed pairs are cheap: the zero reparametrization
    # is already a fixpoint and every label ties at both nodes
    m = GraphicalModel([2, 2], [(0, 1)], [np.zeros(2)] * 2, [np.eye(2)])
    phi, tr = run_srmp(m, iters=4, tol=-1.0)
    assert np.allclose(phi.values, 0.0)
    naive = round_dual(reparametrize(m, phi))
    assert energy(m, naive) == 1.0
    y = srmp_round(m, phi, tr.meta["last_order"])
    assert energy(m, y) == 0.0


def test_srmp_rejects_bad_counts(rng):
    m = random_chain(rng, 3, 2)
    with pytest.raises(InvalidModelError):
        run_srmp(m, counts=np.array([1, 0, 1]), iters=1)


def test_trws_messages_agree_with_srmp(rng):
    for _ in range(10):
        m = connected(rng, 5, 3, integer=False)
        c = chain_counts(m)
        p1, _ = run_srmp(m, c, iters=400, tol=-1.0, track_epsilon=False)
        p2, _ = trws_messages(m, c, 400)
        assert dual(m, p2) == pytest.approx(dual(m, p1), abs=1e-6)
        assert dual(m, p2) <= brute_force(m).energy + 1e-9


def test_trws_messages_chain_one_pass(rng):
    m = random_chain(rng, 6, 3)
    phi, _ = trws_messages(m, chain_counts(m), 1)
    assert dual(m, phi) == pytest.approx(dp.solve_chain(m)[0], abs=1e-9)


# invariants

def test_ascent(rng):
    for _ in range(20):
        m = connected(rng, 6, 3, integer=False)
        _, td = run_diffusion(m, iters=30, tol=-1.0)
        assert td.meta["initial_dual"] <= td.duals[0] + 1e-9 and non_decreasing(td.duals)
        _, ts = run_srmp(m, iters=30, tol=-1.0)
        assert non_decreasing(ts.duals[1:])


def test_fixpoint_preservation(rng):
    for _ in range(10):
        m = random_model(rng, 4, 2, random_tree_edges(rng, 4))
        phi, tr = run_diffusion(m, iters=5000, tol=1e-9)
        d0 = dual(m, phi)
        _, more = run_diffusion(m, iters=10, tol=-1.0, phi=phi)
        assert all(abs(d - d0) <= 1e-9 for d in more.duals)


def test_closure_monotone_under_diffusion(rng):
    for _ in range(15):
        m = connected(rng, 5, 2)
        phi = Reparametrization(m)
        prev = closure(mi(reparametrize(m, phi)))
        for _ in range(10):
            run_diffusion(m, iters=1, tol=-1.0, phi=phi, track_epsilon=False)
            cur = closure(mi(reparametrize(m, phi)))
            assert prev <= cur
            prev = cur


def test_boundedness(rng):
    for _ in range(10):
        m = connected(rng, 6, 3, integer=False)
        allc = np.concatenate([a.ravel() for a in m.unary + m.pairwise])
        bound = (m.node_count + m.edge_count) * np.abs(allc).max() + np.abs(allc).sum()
        phi = Reparametrization(m)
        for _ in range(50):
            run_diffusion(m, iters=1, tol=-1.0, phi=phi, track_epsilon=False)
            c = reparametrize(m, phi)
            assert c.max_abs() <= bound


def test_equal_counts_identical_iterates(rng):
    from mrfmap.decomposition import edge_structure, split_costs
    m = connected(rng, 6, 3, integer=False)
    dec = split_costs(m, edge_structure(m))
    from_dec = np.array([len(mem) for mem in dec.node_members])
    p1, _ = run_srmp(m, from_dec, iters=7, tol=-1.0)
    p2, _ = run_srmp(m, chain_counts(m, variant="edges"), iters=7, tol=-1.0)
    assert np.array_equal(p1.values, p2.values)


def test_srmp_pass_matches_run(rng):
    m = connected(rng, 5, 3, integer=False)
    c = chain_counts(m)
    phi = Reparametrization(m)
    srmp_pass(m, phi, np.arange(5), c)
    srmp_pass(m, phi, np.arange(5)[::-1], c)
    ref, _ = run_srmp(m, c, iters=2, tol=-1.0)
    assert np.array_equal(phi.values, ref.values)


@pytest.mark.skipif(BACKEND != "compiled", reason="compiled kernels not built")
def test_backends_agree(rng):
    py, cy = kernels("python"), kernels("compiled")
    for _ in range(10):
        m = connected(rng, 8, 3, integer=False)
        pk = m.packed
        v0 = rng.normal(size=pk.slot_off[-1])
        w = DiffusionWeights.minsum(m).values
        a, b = v0.copy(), v0.copy()
        order = rng.permutation(8).astype(np.int64)
        py.node_sweep(pk, a, order, w)
        cy.node_sweep(pk, b, order, w)
        assert np.allclose(a, b, atol=1e-12)
        assert py.dual_value(pk, a) == pytest.approx(cy.dual_value(pk, a), abs=1e-12)
