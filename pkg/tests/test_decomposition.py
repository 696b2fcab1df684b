import itertools

import numpy as np
import pytest

from conftest import (chain_message_phi, connected_model, random_chain, random_model,
                      random_tree_edges)
from mrfmap import dp
from mrfmap.consistency import dual_value, epsilon_agreement
from mrfmap.decomposition import (InvalidWeightsError, Slave, averaging_step, averaging_sweep,
                                  chain_structure, complete_decomposition, complete_structure,
                                  dual_subgradient, edge_structure, eval_U, grid_structure,
                                  run_subgradient, slave_node_min_marginals, split_costs,
                                  subgradient_U_step, subproblem_agreement)
from mrfmap.dual_ascent import (DiffusionWeights, chain_counts, diffusion_node_update, dual,
                                run_srmp, srmp_pass)
from mrfmap.harness.bruteforce import brute_force
from mrfmap.harness.generators import grid_edges
from mrfmap.model import GraphicalModel, InvalidStructureError, Reparametrization, reparametrize


def grid_model(rng, h, w, L, integer=True):
    return random_model(rng, h * w, L, grid_edges(h, w), integer=integer)


def random_rho(rng, model, slaves):
    """Positive weights summing to one per factor."""
    dec = split_costs(model, slaves)
    table = {}
    for kind, members in (("node", dec.node_members), ("edge", dec.edge_members)):
        for w, mem in enumerate(members):
            ws = rng.dirichlet(np.ones(len(mem))) * 0.9 + 0.1 / len(mem)
            for (t, _), r in zip(mem, ws / ws.sum()):
                table[kind, w, t] = r
    return lambda kind, w, t: table[kind, w, t]


def chain_optimum(model, nodes):
    """Enumerated optimum of a sub-chain whose unaries were halved."""
    best = np.inf
    for y in itertools.product(*[range(int(model.labels[u])) for u in nodes]):
        val = sum(model.unary[u][s] / 2 for u, s in zip(nodes, y))
        for (a, b), (s, t) in zip(zip(nodes, nodes[1:]), zip(y, y[1:])):
            val += model.pair(a, b)[s, t]
        best = min(best, val)
    return best


# structures

def test_structures_cover_everything(rng):
    for _ in range(20):
        m = connected_model(rng, 6, 2)
        for slaves in (complete_structure(m), edge_structure(m), chain_structure(m)):
            dec = split_costs(m, slaves)
            assert all(dec.node_members) and all(dec.edge_members)
            assert dec.feasibility_gap() <= 1e-12
        assert all(len(mem) == 1 for mem in split_costs(m, chain_structure(m)).edge_members)


def test_invalid_slaves_rejected(rng):
    m = random_model(rng, 3, 2, [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(InvalidStructureError):
        split_costs(m, [Slave((0, 1, 2), (0, 1, 2))])
    with pytest.raises(InvalidStructureError):
        split_costs(m, [Slave((0, 1), (0,))])
    with pytest.raises(InvalidStructureError):
        split_costs(m, [Slave((0, 1), (1,)), Slave((1, 2), (0,)), Slave((0, 2), (2,))])


def test_chain_structure_counts_match_chain_counts(rng):
    for _ in range(20):
        m = connected_model(rng, 7, 2, extra=0.4)
        dec = split_costs(m, chain_structure(m))
        got = [max(1, len(mem)) for mem in dec.node_members]
        assert got == chain_counts(m).tolist()


# split_costs

def test_uniform_split(rng):
    m = connected_model(rng, 5, 3)
    dec = split_costs(m, edge_structure(m))
    for u, mem in enumerate(dec.node_members):
        for t, i in mem:
            assert np.allclose(dec.unary[t][i], m.unary[u] / len(mem))


def test_grid_row_column_split(rng):
    m = grid_model(rng, 3, 3, 2)
    dec = split_costs(m, grid_structure(3, 3, m))
    for u, mem in enumerate(dec.node_members):
        assert len(mem) == 2
        for t, i in mem:
            assert np.array_equal(dec.unary[t][i], m.unary[u] / 2)
    for e, mem in enumerate(dec.edge_members):
        (t, j), = mem
        assert np.array_equal(dec.pairwise[t][j], m.pairwise[e])


def test_random_rho_resums(rng):
    for _ in range(20):
        m = connected_model(rng, 5, 3, integer=False)
        slaves = complete_structure(m)
        dec = split_costs(m, slaves, random_rho(rng, m, slaves))
        assert dec.feasibility_gap() <= 1e-12


def test_bad_rho_rejected(rng):
    m = connected_model(rng, 4, 2)
    with pytest.raises(InvalidWeightsError):
        split_costs(m, complete_structure(m), lambda kind, w, t: 0.3)


# eval_U

def test_single_tree_slave_is_exact(rng):
    for _ in range(20):
        n = int(rng.integers(1, 7))
        m = random_model(rng, n, 3, random_tree_edges(rng, n))
        if n == 1:
            continue
        dec = split_costs(m, [Slave(tuple(range(n)), tuple(range(m.edge_count)))])
        assert eval_U(dec)[0] == brute_force(m).energy


def test_grid_U_is_sum_of_chain_optima(rng):
    m = grid_model(rng, 3, 3, 2)
    dec = split_costs(m, grid_structure(3, 3, m))
    idx = np.arange(9).reshape(3, 3)
    lines = [list(r) for r in idx] + [list(c) for c in idx.T]
    assert eval_U(dec)[0] == pytest.approx(sum(chain_optimum(m, ln) for ln in lines), abs=1e-12)
    assert eval_U(dec)[0] <= brute_force(m).energy


def test_complete_decomposition_equals_dual(rng):
    for _ in range(50):
        m = connected_model(rng, 5, 3, integer=False)
        phi = Reparametrization(m, rng.normal(size=m.packed.slot_off[-1]))
        dec = complete_decomposition(m, reparametrize(m, phi))
        assert eval_U(dec)[0] == pytest.approx(dual_value(m, phi), abs=1e-12)


def test_dominance_and_weak_duality(rng):
    for _ in range(60):
        m = connected_model(rng, 5, 2, integer=False)
        phi = Reparametrization(m, rng.normal(size=m.packed.slot_off[-1]))
        slaves = chain_structure(m) if rng.random() < 0.5 else edge_structure(m)
        dec = split_costs(m, slaves, random_rho(rng, m, slaves), reparametrize(m, phi))
        u_val = eval_U(dec)[0]
        assert dual_value(m, phi) <= u_val + 1e-9
        assert u_val <= brute_force(m).energy + 1e-9


# subgradient on U

def test_agreeing_slaves_give_zero_step(rng):
    m = grid_model(rng, 2, 2, 2)
    un = [np.array([-100.0, 0.0])] * 4
    m = GraphicalModel(m.labels, m.edges, un, m.pairwise)
    dec = split_costs(m, grid_structure(2, 2, m))
    before = dec.copy()
    subgradient_U_step(dec, 1.0)
    assert all(np.array_equal(a, b) for ua, ub in zip(dec.unary, before.unary)
               for a, b in zip(ua, ub))


def test_grid_step_pattern(rng):
    for _ in range(20):
        m = grid_model(rng, 2, 2, 2)
        dec = split_costs(m, grid_structure(2, 2, m))
        before = dec.copy()
        _, sol = eval_U(dec)
        subgradient_U_step(dec, 1.0, sol)
        for u, mem in enumerate(dec.node_members):
            (tr, ir), (tc, ic) = mem  # the row chain comes first
            a, b = sol.labelings[tr][ir], sol.labelings[tc][ic]
            g = np.zeros(2)
            if a != b:
                g[b], g[a] = 1.0, -1.0
            assert np.array_equal(dec.unary[tc][ic] - before.unary[tc][ic], g)
            assert np.array_equal(dec.unary[tr][ir] - before.unary[tr][ir], -g)
        assert dec.feasibility_gap() <= 1e-12


def test_step_preserves_feasibility(rng):
    for _ in range(20):
        m = connected_model(rng, 6, 3, integer=False)
        slaves = edge_structure(m)
        dec = split_costs(m, slaves, random_rho(rng, m, slaves))
        for t in range(5):
            subgradient_U_step(dec, 0.7 / (1 + t))
        assert dec.feasibility_gap() <= 1e-9


def test_run_subgradient_U_bounded(rng):
    m = grid_model(rng, 3, 3, 2)
    dec, tr = run_subgradient(m, "U", beta=1.0, iters=50,
                              decomposition=split_costs(m, grid_structure(3, 3, m)))
    assert max(tr.duals) <= brute_force(m).energy + 1e-9
    assert tr.meta["best_dual"] == max(tr.duals)
    assert dec.feasibility_gap() <= 1e-9


# subgradient on D

def test_D_subgradient_zero_at_agreement():
    un = [np.array([0.0, 3.0])] * 3
    m = GraphicalModel([2] * 3, [(0, 1), (1, 2)], un, [np.array([[0.0, 1.0], [1.0, 2.0]])] * 2)
    phi, _ = run_subgradient(m, "D", beta=1.0, iters=3)
    assert not phi.values.any()


def test_D_subgradient_sparsity(rng):
    for _ in range(30):
        m = connected_model(rng, 5, 4, integer=False)
        g = dual_subgradient(m, Reparametrization(m, rng.normal(size=m.packed.slot_off[-1])))
        for e in range(m.edge_count):
            for side in (0, 1):
                assert np.count_nonzero(g.slot(e, side)) <= 2


def test_D_supergradient_inequality(rng):
    for _ in range(50):
        m = connected_model(rng, 5, 3, integer=False)
        size = m.packed.slot_off[-1]
        phi = Reparametrization(m, rng.normal(size=size))
        other = Reparametrization(m, rng.normal(size=size))
        g = dual_subgradient(m, phi)
        rhs = dual_value(m, phi) + float(g.values @ (other.values - phi.values))
        assert dual_value(m, other) <= rhs + 1e-9


def test_run_subgradient_validation(rng):
    m = connected_model(rng, 3, 2)
    with pytest.raises(ValueError):
        run_subgradient(m, beta=0.0)
    with pytest.raises(ValueError):
        run_subgradient(m, gamma=0.0)
    with pytest.raises(ValueError):
        run_subgradient(m, target="X")


def test_run_subgradient_D_weak_duality(rng):
    for _ in range(10):
        m = connected_model(rng, 5, 3, integer=False)
        _, tr = run_subgradient(m, "D", beta=0.5, gamma=-0.5, iters=40, primal=True)
        opt = brute_force(m).energy
        assert max(tr.duals) <= opt + 1e-9
        assert tr.rows[-1].primal_best >= opt - 1e-9


# averaging

def test_averaging_single_member_noop(rng):
    m = random_chain(rng, 4, 3)
    dec = split_costs(m, chain_structure(m))
    before = dec.copy()
    averaging_step(dec, 2)
    assert all(np.array_equal(a, b) for ua, ub in zip(dec.unary, before.unary)
               for a, b in zip(ua, ub))


def test_averaging_equalizes_and_ascends(rng):
    for _ in range(30):
        m = connected_model(rng, 6, 3, integer=False)
        dec = split_costs(m, chain_structure(m))
        for u in rng.permutation(6):
            u_before = eval_U(dec)[0]
            averaging_step(dec, int(u))
            E = [slave_node_min_marginals(dec, t)[i] for t, i in dec.node_members[u]]
            assert all(np.allclose(x, E[0], atol=1e-9) for x in E)
            assert eval_U(dec)[0] >= u_before - 1e-9
        assert dec.feasibility_gap() <= 1e-9


def test_averaging_on_edges_is_minsum_diffusion(rng):
    for _ in range(20):
        m = connected_model(rng, 5, 3, integer=False)
        m = GraphicalModel(m.labels, m.edges, [np.zeros(3)] * 5, m.pairwise)
        dec = split_costs(m, edge_structure(m))
        phi = Reparametrization(m)
        w = DiffusionWeights.minsum(m)
        for u in list(range(5)) * 2:
            averaging_step(dec, u)
            diffusion_node_update(m, phi, u, w)
            c = reparametrize(m, phi)
            for e in range(m.edge_count):
                (t, j), = dec.edge_members[e]
                total = dec.unary[t][0][:, None] + dec.pairwise[t][j] + dec.unary[t][1][None, :]
                assert np.allclose(total, c.pairwise[e], atol=1e-9)
            assert np.allclose(c.unary[u], 0.0, atol=1e-12)
            assert eval_U(dec)[0] == pytest.approx(dual(m, phi), abs=1e-9)


def test_averaging_on_chains_follows_srmp(rng):
    for _ in range(30):
        m = connected_model(rng, int(rng.integers(2, 7)), 3, extra=0.5, integer=False)
        order = np.arange(m.node_count)
        dec = split_costs(m, chain_structure(m, order))
        counts = chain_counts(m, order)
        phi = chain_message_phi(m, dec)
        for p in range(6):
            cur = order if p % 2 == 0 else order[::-1]
            srmp_pass(m, phi, cur, counts)
            averaging_sweep(dec, cur)
            assert eval_U(dec)[0] == pytest.approx(dual(m, phi), abs=1e-9)


def test_max_U_equals_max_D_on_trees(rng):
    for _ in range(10):
        n = int(rng.integers(3, 7))
        m = random_model(rng, n, 3, random_tree_edges(rng, n), integer=False)
        dec = split_costs(m, chain_structure(m))
        for p in range(200):
            averaging_sweep(dec, range(n) if p % 2 == 0 else range(n - 1, -1, -1))
        _, tr = run_srmp(m, iters=2000, tol=1e-12)
        assert eval_U(dec)[0] == pytest.approx(max(tr.duals), abs=1e-4)


# subproblem agreement

def test_single_slave_always_agrees(rng):
    m = random_chain(rng, 4, 3)
    dec = split_costs(m, [Slave(tuple(range(4)), (0, 1, 2))])
    agrees, supports = subproblem_agreement(dec)
    assert agrees and all(s.any() for s in supports)


def test_complete_agreement_is_node_edge_agreement(rng):
    seen = set()
    for k in range(80):
        if k % 2:
            m = connected_model(rng, 4, 2)
            phi = Reparametrization(m, rng.integers(-2, 3, m.packed.slot_off[-1]).astype(float))
        else:
            # one pass on an integer chain is exact and leaves integer costs
            m = random_chain(rng, 4, 2)
            phi, _ = run_srmp(m, iters=1, track_epsilon=False)
        c = reparametrize(m, phi)
        agrees, _ = subproblem_agreement(complete_decomposition(m, c))
        expected = epsilon_agreement(c).epsilon == 0.0
        assert agrees == expected
        seen.add(agrees)
    assert seen == {True, False}


def test_tree_agreement_without_node_edge_agreement():
    # one chain slave: the slave optimum always agrees with itself, but the
    # master's node and edge minima point at different labelings
    m = GraphicalModel([2, 2, 2], [(0, 1), (1, 2)],
                       [np.array([0.0, 1.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])],
                       [np.array([[0.0, 3.0], [3.0, 0.0]])] * 2)
    dec = split_costs(m, [Slave((0, 1, 2), (0, 1))])
    assert subproblem_agreement(dec)[0]
    assert epsilon_agreement(m.costs).epsilon > 0
    assert dp.solve_chain(m)[0] == brute_force(m).energy
