import itertools

import numpy as np
import pytest

from conftest import random_chain, random_model
from mrfmap import dp
from mrfmap.harness.bruteforce import brute_force
from mrfmap.harness.generators import icm_trap, grid_random
from mrfmap.model import InvalidStructureError, PartialLabeling, energy
from mrfmap.primal import (block_icm, conditional_costs, forest_blocks, grid_blocks, icm,
                           local_costs)


def is_local_minimum(model, y):
    return all(local_costs(model, y, u)[y[u]] <= local_costs(model, y, u).min()
               for u in range(model.node_count))


def test_icm_stuck_at_local_fixpoint():
    m = icm_trap()
    y = icm(m, [1, 1])
    assert y.tolist() == [1, 1] and energy(m, y) == 1.0
    assert brute_force(m).energy == 0.0


def test_icm_keeps_global_optimum(rng):
    for _ in range(20):
        m = random_model(rng, 5, 3, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])
        y = brute_force(m).labeling
        assert icm(m, y).tolist() == y.tolist()


def test_icm_monotone_and_locally_optimal(rng):
    for _ in range(50):
        m = random_model(rng, 6, 3, [(0, 1), (1, 2), (0, 2), (3, 4), (2, 5), (4, 5)],
                         integer=False)
        y0 = rng.integers(0, 3, 6)
        y = icm(m, y0)
        assert energy(m, y) <= energy(m, y0)
        assert is_local_minimum(m, y)


def test_icm_default_start_is_dual_rounding(rng):
    m = random_model(rng, 4, 3, [])
    assert icm(m).tolist() == [int(np.argmin(a)) for a in m.unary]


def test_conditional_costs_empty_fix(rng):
    m = random_model(rng, 4, 2, [(0, 1), (1, 2), (2, 3)])
    sub, free, const = conditional_costs(m, PartialLabeling((), ()))
    assert const == 0.0 and free.tolist() == [0, 1, 2, 3]
    assert all(np.array_equal(a, b) for a, b in zip(sub.unary + sub.pairwise,
                                                     m.unary + m.pairwise))


def test_conditional_costs_single_free_node_is_icm_step(rng):
    m = random_model(rng, 4, 3, [(0, 1), (1, 2), (0, 2), (2, 3)])
    y = rng.integers(0, 3, 4)
    sub, free, const = conditional_costs(m, PartialLabeling((0, 1, 3), (int(y[0]), int(y[1]), int(y[3]))))
    assert free.tolist() == [2]
    assert np.array_equal(sub.unary[0], local_costs(m, y, 2))


def test_conditional_costs_identity_exhaustive(rng):
    for _ in range(30):
        m = random_model(rng, 6, 2, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)])
        dom = tuple(sorted(rng.choice(6, size=2, replace=False).tolist()))
        lab = tuple(int(x) for x in rng.integers(0, 2, 2))
        sub, free, const = conditional_costs(m, PartialLabeling(dom, lab))
        for yp in itertools.product(range(2), repeat=len(free)):
            y = np.zeros(6, dtype=int)
            y[list(dom)] = lab
            y[free] = yp
            assert energy(sub, yp) + const == energy(m, y)


def test_block_icm_whole_chain_is_exact(rng):
    for _ in range(20):
        m = random_chain(rng, 6, 3)
        y = block_icm(m, rng.integers(0, 3, 6), [list(range(6))], max_rounds=1)
        assert energy(m, y) == dp.solve_chain(m)[0]


def test_block_icm_escapes_icm_trap():
    m = icm_trap()
    y = block_icm(m, [1, 1], [[0, 1]])
    assert y.tolist() == [0, 0]


def test_block_icm_rejects_cycle(rng):
    m = random_model(rng, 3, 2, [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(InvalidStructureError):
        block_icm(m, [0, 0, 0], [[0, 1, 2]])


def test_block_icm_grid_beats_icm():
    for seed in range(20):
        m = grid_random(4, 4, 3, seed=seed)
        y0 = np.zeros(16, dtype=int)
        yb = block_icm(m, y0, grid_blocks(4, 4))
        yi = icm(m, y0)
        assert energy(m, yb) <= energy(m, y0)
        # block steps contain single-node steps, so the fixpoint is at least as good locally
        assert is_local_minimum(m, yb)
        assert energy(m, yb) <= energy(m, yi) + 1e-12


def test_block_step_is_exact(rng):
    # one block on <=4 free nodes: compare with enumeration of the block
    for _ in range(20):
        m = random_model(rng, 6, 2, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)])
        y0 = rng.integers(0, 2, 6)
        block = [0, 1, 2, 3]
        y = block_icm(m, y0, [block], max_rounds=1)
        best = min(energy(m, np.concatenate([yp, y0[4:]]))
                   for yp in itertools.product(range(2), repeat=4))
        assert energy(m, y) == pytest.approx(min(best, energy(m, y0)))


def _is_forest_block(model, block):
    sub, _, _ = conditional_costs(model, PartialLabeling(
        tuple(u for u in range(model.node_count) if u not in block),
        tuple(0 for u in range(model.node_count) if u not in block)))
    return dp.is_forest(sub)


@pytest.mark.parametrize("h,w", [(1, 1), (2, 2), (3, 3), (4, 5)])
def test_grid_blocks_are_forests(h, w):
    m = grid_random(h, w, 2)
    blocks = grid_blocks(h, w)
    assert len(blocks) == 4
    for b in blocks:
        assert _is_forest_block(m, set(b))
    if (h, w) == (1, 1):
        assert blocks == [[0], [0], [0], [0]]
    if (h, w) == (2, 2):
        assert blocks[0] == [0, 2]


def test_forest_blocks_cover(rng):
    m = random_model(rng, 7, 2, [(u, v) for u in range(7) for v in range(u + 1, 7)])
    blocks = forest_blocks(m)
    assert sorted(u for b in blocks for u in b) == list(range(7))
    assert all(_is_forest_block(m, set(b)) for b in blocks)
