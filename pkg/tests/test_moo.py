import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from divbench import moo
from divbench.evaluation import Evaluated, LearnedEvaluator
from divbench.moo import (
    crowding_distance,
    dominates,
    fast_non_dominated_sort,
    lexicase_select,
    nsga2_survivors,
)


def brute_force_fronts(objs):
    """Peel fronts by repeatedly taking members dominated by nobody left."""
    left = list(range(len(objs)))
    fronts = []
    while left:
        front = [i for i in left
                 if not any(np.all(objs[j] >= objs[i]) and np.any(objs[j] > objs[i]) for j in left)]
        fronts.append(sorted(front))
        left = [i for i in left if i not in front]
    return fronts


def naive_crowding(objs):
    n, d = objs.shape
    out = [0.0] * n
    if n <= 2:
        return [float("inf")] * n
    for j in range(d):
        order = sorted(range(n), key=lambda i: (objs[i, j], i))
        lo, hi = objs[order[0], j], objs[order[-1], j]
        out[order[0]] = out[order[-1]] = float("inf")
        if hi == lo:
            continue
        for pos in range(1, n - 1):
            out[order[pos]] += (objs[order[pos + 1], j] - objs[order[pos - 1], j]) / (hi - lo)
    return out


def test_dominates_examples():
    assert dominates([1, 1], [0, 1])
    assert not dominates([1, 0], [0, 1]) and not dominates([0, 1], [1, 0])
    assert not dominates([2, 3], [2, 3])


def test_dominates_shape_mismatch():
    with pytest.raises(ValueError):
        dominates([1, 2], [1, 2, 3])


vec3 = hnp.arrays(np.float64, 3, elements=st.integers(-3, 3).map(float))


@settings(max_examples=300, deadline=None)
@given(vec3, vec3, vec3)
def test_dominance_strict_partial_order(a, b, c):
    assert not dominates(a, a)
    assert not (dominates(a, b) and dominates(b, a))
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


def test_sort_identical_and_chain():
    assert fast_non_dominated_sort(np.ones((6, 3))) == [list(range(6))]
    chain = np.arange(5.0)[:, None] * np.ones((1, 2))
    assert fast_non_dominated_sort(chain) == [[4], [3], [2], [1], [0]]


def test_sort_fifty_random_three_objective():
    objs = np.random.default_rng(0).normal(size=(50, 3))
    assert [sorted(f) for f in fast_non_dominated_sort(objs)] == brute_force_fronts(objs)


def test_sort_rejects_empty():
    with pytest.raises(ValueError):
        fast_non_dominated_sort(np.zeros((0, 2)))


def test_crowding_small_fronts():
    assert np.all(np.isinf(crowding_distance(np.array([[1.0, 2.0]]))))
    assert np.all(np.isinf(crowding_distance(np.array([[1.0, 2.0], [2.0, 1.0]]))))


def test_crowding_collinear():
    d = crowding_distance(np.array([[0.0], [1.0], [2.0]]))
    assert d[1] == 1.0 and np.isinf(d[0]) and np.isinf(d[2])


def test_crowding_matches_naive():
    objs = np.random.default_rng(3).normal(size=(20, 3))
    np.testing.assert_allclose(crowding_distance(objs), naive_crowding(objs), rtol=1e-12)


def test_crowding_flat_objective_contributes_nothing():
    objs = np.column_stack([np.arange(5.0), np.full(5, 2.0)])
    d = crowding_distance(objs)
    np.testing.assert_allclose(d[1:4], 0.5)


def test_survivors_contain_front_zero():
    rng = np.random.default_rng(1)
    for _ in range(30):
        objs = rng.normal(size=(40, 2))
        f0 = fast_non_dominated_sort(objs)[0]
        mu = int(rng.integers(len(f0), 40))
        keep = nsga2_survivors(objs, mu)
        assert len(keep) == mu and len(set(keep.tolist())) == mu
        assert set(f0) <= set(keep.tolist())


def test_lexicase_single_member():
    assert lexicase_select(np.array([[3.0, -1.0]]), np.random.default_rng(0)) == 0


class _FixedOrder:
    """Stands in for a generator so a chosen objective ordering can be forced."""

    def __init__(self, order):
        self.order = np.asarray(order)

    def permutation(self, d):
        return self.order

    def integers(self, n):
        return 0


def test_lexicase_strict_never_picks_dominated_enumerated():
    rng = np.random.default_rng(4)
    for _ in range(200):
        n = int(rng.integers(2, 7))
        d = int(rng.integers(1, 5))
        objs = rng.integers(0, 3, size=(n, d)).astype(float)
        dominated = {i for i in range(n) if any(dominates(objs[j], objs[i]) for j in range(n))}
        for order in itertools.permutations(range(d)):
            # every tie-break position must be safe too, so inspect the whole final pool
            pool = np.arange(n)
            for j in order:
                col = objs[pool, j]
                pool = pool[col >= col.max()]
            assert not set(pool.tolist()) & dominated
            assert lexicase_select(objs, _FixedOrder(order)) not in dominated


def test_lexicase_four_by_three_instance():
    objs = np.array([[3.0, 1.0, 2.0], [2.0, 1.0, 2.0], [1.0, 3.0, 0.0], [0.0, 0.0, 3.0]])
    for order in itertools.permutations(range(3)):
        assert lexicase_select(objs, _FixedOrder(order)) != 1


def test_lexicase_ties_are_uniform():
    objs = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
    rng = np.random.default_rng(0)
    picks = np.array([lexicase_select(objs, rng) for _ in range(10_000)])
    assert 2 not in picks
    assert abs(np.mean(picks == 0) - 0.5) <= 0.05


def test_mad_epsilon():
    objs = np.array([[1.0, 10.0], [2.0, 10.0], [4.0, 10.0], [8.0, 10.0]])
    np.testing.assert_allclose(moo.mad_epsilon(objs), [1.5, 0.0])


def _affine(objs, rng):
    a = rng.uniform(0.1, 10, size=objs.shape[1])
    return objs * a + rng.normal() * 5


def test_affine_invariance_survivors():
    rng = np.random.default_rng(2)
    for _ in range(50):
        objs = rng.normal(size=(60, 3))
        mu = 30
        assert set(nsga2_survivors(objs, mu).tolist()) == set(nsga2_survivors(_affine(objs, rng), mu).tolist())


def test_affine_invariance_lexicase_distribution():
    rng = np.random.default_rng(5)
    objs = rng.integers(0, 4, size=(8, 3)).astype(float)
    moved = _affine(objs, rng)
    a = np.bincount([lexicase_select(objs, np.random.default_rng([1, i])) for i in range(10_000)], minlength=8)
    b = np.bincount([lexicase_select(moved, np.random.default_rng([1, i])) for i in range(10_000)], minlength=8)
    assert np.abs(a - b).max() / 10_000 <= 0.02


class ToyDomain:
    """One real gene x in [-1, 1]; objectives (x, 1 - x**2) via an identity 'head'."""

    name = "toy"
    integer = False
    lower, upper = -1.0, 1.0
    genotype_length = 1
    phenotype_dim = 1
    fitness_offset = 0.0

    def random_genotypes(self, rng, n):
        return rng.uniform(-1, 1, size=(n, 1))

    def evaluate_many(self, g):
        x = g[:, 0]
        return g.copy(), x + 1 - x * x


class ToyEvaluator:
    domain = ToyDomain()
    n_objectives = 2

    def __init__(self):
        self.evaluations = 0

    def __call__(self, genotypes):
        g = np.atleast_2d(np.asarray(genotypes, dtype=np.float64))
        self.evaluations += len(g)
        x = g[:, 0]
        objs = np.column_stack([x, 1 - x * x])
        return Evaluated(g, objs.sum(axis=1), objs, objs)


def test_nsga2_analytic_front():
    res = moo.nsga2_run(ToyEvaluator(), 40, 4000, seed=0)
    objs = res.population.objectives
    front = objs[fast_non_dominated_sort(objs)[0]]
    x = front[:, 0]
    # the Pareto set of (x, 1 - x^2) over [-1, 1] is x >= 0
    assert np.all(x >= -0.05)
    np.testing.assert_allclose(front[:, 1], 1 - x * x, atol=0.05)
    assert x.max() - x.min() > 0.5


@pytest.mark.parametrize("run", [moo.nsga2_run, moo.lexicase_run, moo.single_objective_run])
def test_budget_equals_mu(run):
    ev = ToyEvaluator()
    res = run(ev, 20, 20, seed=1)
    assert ev.evaluations == 20 == len(res.log) == len(res.population)
    assert res.selection_trace == []


@pytest.mark.parametrize("run", [moo.nsga2_run, moo.lexicase_run, moo.single_objective_run])
@pytest.mark.parametrize("budget", [100, 157, 333])
def test_budget_parity(run, budget):
    ev = ToyEvaluator()
    res = run(ev, 20, budget, seed=2)
    assert ev.evaluations == budget == len(res.log)
    assert np.all(np.diff(res.log.best_so_far()) >= 0)


@pytest.mark.parametrize("run", [moo.nsga2_run, moo.lexicase_run, moo.single_objective_run])
def test_runs_deterministic(run):
    a = run(ToyEvaluator(), 20, 200, seed=9)
    b = run(ToyEvaluator(), 20, 200, seed=9)
    assert a.log.ground_truth == b.log.ground_truth


def test_bias_shift_changes_no_run():
    class Shifted(ToyEvaluator):
        def __call__(self, genotypes):
            ev = super().__call__(genotypes)
            return Evaluated(ev.genotypes, ev.ground_truth, ev.measures, ev.objectives + 123.0)

    for run in (moo.nsga2_run, moo.lexicase_run):
        a = run(ToyEvaluator(), 20, 300, seed=4)
        b = run(Shifted(), 20, 300, seed=4)
        assert a.log.ground_truth == b.log.ground_truth


def test_argument_errors():
    with pytest.raises(ValueError):
        moo.nsga2_run(ToyEvaluator(), 21, 100)
    with pytest.raises(ValueError):
        moo.nsga2_run(ToyEvaluator(), 20, 10)
    with pytest.raises(ValueError):
        moo.lexicase_run(ToyEvaluator(), 20, 100, epsilon="huge")


def test_objective_runs_need_a_head(small_models):
    domain = small_models[0]
    with pytest.raises(ValueError, match="fitness head"):
        moo.nsga2_run(LearnedEvaluator(domain), 20, 40)


def test_lexicase_elite_uses_objective_sum():
    class Inverted(ToyEvaluator):
        # ground truth disagrees with the objective sum, so an elite chosen by
        # ground truth would be visibly different
        def __call__(self, genotypes):
            ev = super().__call__(genotypes)
            return Evaluated(ev.genotypes, -ev.ground_truth, ev.measures, ev.objectives)

    res = moo.lexicase_run(Inverted(), 10, 19, seed=0)
    objs = np.asarray(res.log.objectives[:10])
    gt = np.asarray(res.log.ground_truth[:10])
    assert len(res.population) == 10 and res.population.generation == 1
    assert res.population.ground_truth[0] == gt[np.argmax(objs.sum(axis=1))]
    assert res.population.ground_truth[0] != gt.max()
