"""Objective-based search on the de-aggregated sub-objectives.

NSGA-II and epsilon-lexicase only ever see the objective matrix; the ground
truth rides along for logging. The single-objective GA is the conventional
baseline and selects on ground truth directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from divbench.evaluation import Evaluated, RunLog
from divbench.variation import VariationConfig, mutate, uniform_crossover

# crowding values are compared on this grid so that rescaling an objective
# cannot flip a comparison through last-bit rounding
CROWDING_DECIMALS = 9


@dataclass
class ScoredIndividual:
    genotype: np.ndarray
    objectives: np.ndarray
    ground_truth: float
    measures: np.ndarray | None


@dataclass
class Population:
    genotypes: np.ndarray
    objectives: np.ndarray | None
    ground_truth: np.ndarray
    measures: np.ndarray | None = None
    generation: int = 0

    @classmethod
    def from_evaluated(cls, ev: Evaluated, generation: int = 0) -> Population:
        return cls(ev.genotypes, ev.objectives, ev.ground_truth, ev.measures, generation)

    def __len__(self) -> int:
        return len(self.genotypes)

    @property
    def members(self) -> list[ScoredIndividual]:
        return [
            ScoredIndividual(self.genotypes[i],
                             None if self.objectives is None else self.objectives[i],
                             float(self.ground_truth[i]),
                             None if self.measures is None else self.measures[i])
            for i in range(len(self))
        ]

    def take(self, idx) -> Population:
        idx = np.asarray(idx, dtype=np.int64)

        def pick(a):
            return None if a is None else a[idx]

        return Population(self.genotypes[idx], pick(self.objectives), self.ground_truth[idx],
                          pick(self.measures), self.generation)

    @staticmethod
    def concat(a: Population, b: Population) -> Population:
        def cat(x, y):
            return None if x is None else np.concatenate([x, y])

        return Population(np.concatenate([a.genotypes, b.genotypes]), cat(a.objectives, b.objectives),
                          np.concatenate([a.ground_truth, b.ground_truth]),
                          cat(a.measures, b.measures), a.generation)


@dataclass
class RunResult:
    log: RunLog
    population: Population
    # per generation: indices chosen by the selection operator (survivors for
    # NSGA-II environmental selection, parents otherwise)
    selection_trace: list = field(default_factory=list)


def dominates(a, b) -> bool:
    """Pareto dominance for maximization."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"objective vectors differ in shape: {a.shape} vs {b.shape}")
    return bool(np.all(a >= b) and np.any(a > b))


def dominance_matrix(objs: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when member i dominates member j."""
    a = objs[:, None, :]
    b = objs[None, :, :]
    return np.all(a >= b, axis=2) & np.any(a > b, axis=2)


def fast_non_dominated_sort(objs) -> list[list[int]]:
    objs = np.asarray(objs, dtype=np.float64)
    if objs.ndim != 2 or objs.shape[0] == 0:
        raise ValueError("need a non-empty (n, d) objective matrix")
    dom = dominance_matrix(objs)
    count = dom.sum(axis=0)  # how many members dominate j
    fronts = []
    current = np.flatnonzero(count == 0)
    while current.size:
        fronts.append(current.tolist())
        count = count - dom[current].sum(axis=0)
        count[current] = -1
        current = np.flatnonzero(count == 0)
    return fronts


def crowding_distance(objs) -> np.ndarray:
    objs = np.asarray(objs, dtype=np.float64)
    n, d = objs.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(d):
        order = np.argsort(objs[:, j], kind="stable")
        col = objs[order, j]
        span = col[-1] - col[0]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if span == 0:
            continue
        dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def rank_and_crowding(objs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rank = np.empty(len(objs), dtype=np.int64)
    crowd = np.empty(len(objs))
    for r, front in enumerate(fast_non_dominated_sort(objs)):
        rank[front] = r
        crowd[front] = crowding_distance(objs[front])
    return rank, np.round(crowd, CROWDING_DECIMALS)


def nsga2_survivors(objs: np.ndarray, mu: int) -> np.ndarray:
    """Indices of the ``mu`` best members by (front rank, crowding)."""
    chosen = []
    for front in fast_non_dominated_sort(objs):
        if len(chosen) + len(front) <= mu:
            chosen.extend(front)
            continue
        crowd = np.round(crowding_distance(objs[front]), CROWDING_DECIMALS)
        order = np.argsort(-crowd, kind="stable")
        chosen.extend(np.asarray(front)[order[: mu - len(chosen)]].tolist())
        break
    return np.asarray(chosen, dtype=np.int64)


def binary_tournament(rank: np.ndarray, crowd: np.ndarray, rng: np.random.Generator) -> int:
    i, j = (int(v) for v in rng.integers(len(rank), size=2))
    if rank[j] < rank[i] or (rank[j] == rank[i] and crowd[j] > crowd[i]):
        return j
    return i


def mad_epsilon(objs: np.ndarray) -> np.ndarray:
    """Median absolute deviation per objective."""
    med = np.median(objs, axis=0)
    return np.median(np.abs(objs - med), axis=0)


def lexicase_select(objs, rng: np.random.Generator, epsilon=None) -> int:
    """One epsilon-lexicase draw; ``epsilon=None`` means strict lexicase."""
    objs = np.asarray(objs, dtype=np.float64)
    n, d = objs.shape
    if n == 0:
        raise ValueError("empty population")
    eps = np.zeros(d) if epsilon is None else np.broadcast_to(np.asarray(epsilon, dtype=np.float64), (d,))
    pool = np.arange(n)
    for j in rng.permutation(d):
        if pool.size == 1:
            break
        col = objs[pool, j]
        pool = pool[col >= col.max() - eps[j]]
    if pool.size == 1:
        return int(pool[0])
    return int(pool[rng.integers(pool.size)])


def _breed(pop: Population, parents: list[int], n_children: int, domain,
           rng: np.random.Generator, variation: VariationConfig) -> np.ndarray:
    kids = []
    for k in range(0, len(parents), 2):
        a = pop.genotypes[parents[k]]
        b = pop.genotypes[parents[k + 1]]
        c1, c2 = uniform_crossover(a, b, rng, variation.crossover_rate)
        kids.append(mutate(c1, domain, rng, variation))
        kids.append(mutate(c2, domain, rng, variation))
    return np.asarray(kids[:n_children])


def _check_budget(mu: int, budget: int):
    if mu < 2 or mu % 2:
        raise ValueError("population size must be even and >= 2")
    if budget < mu:
        raise ValueError("budget must cover the initial population")


def _needs_objectives(evaluator):
    if evaluator.n_objectives == 0:
        raise ValueError("this algorithm needs a model and fitness head for its objectives")


def nsga2_run(evaluator, mu: int, budget: int, variation: VariationConfig | None = None,
              seed: int = 0, algorithm: str = "nsga2") -> RunResult:
    _check_budget(mu, budget)
    _needs_objectives(evaluator)
    variation = variation or VariationConfig()
    domain = evaluator.domain
    rng = np.random.default_rng(seed)
    log = RunLog(algorithm, seed)
    first = evaluator(domain.random_genotypes(rng, mu))
    log.extend(first)
    pop = Population.from_evaluated(first)
    trace = []
    used = mu
    while used < budget:
        n_kids = min(mu, budget - used)
        rank, crowd = rank_and_crowding(pop.objectives)
        parents = [binary_tournament(rank, crowd, rng) for _ in range(n_kids + n_kids % 2)]
        kids = evaluator(_breed(pop, parents, n_kids, domain, rng, variation))
        log.extend(kids)
        used += n_kids
        pool = Population.concat(pop, Population.from_evaluated(kids))
        keep = nsga2_survivors(pool.objectives, mu)
        trace.append(keep)
        pop = pool.take(keep)
        pop.generation += 1
    return RunResult(log, pop, trace)


def lexicase_run(evaluator, mu: int, budget: int, variation: VariationConfig | None = None,
                 seed: int = 0, epsilon: str = "mad", algorithm: str = "lexicase") -> RunResult:
    """Generational epsilon-lexicase; the member with the best objective sum is kept as elite."""
    _check_budget(mu, budget)
    _needs_objectives(evaluator)
    if epsilon not in ("mad", "none"):
        raise ValueError("epsilon must be 'mad' or 'none'")
    variation = variation or VariationConfig()
    domain = evaluator.domain
    rng = np.random.default_rng(seed)
    log = RunLog(algorithm, seed)
    first = evaluator(domain.random_genotypes(rng, mu))
    log.extend(first)
    pop = Population.from_evaluated(first)
    trace = []
    used = mu
    while used < budget:
        n_kids = min(mu - 1, budget - used)
        eps = mad_epsilon(pop.objectives) if epsilon == "mad" else None
        parents = [lexicase_select(pop.objectives, rng, eps) for _ in range(n_kids + n_kids % 2)]
        trace.append(np.asarray(parents, dtype=np.int64))
        kids = evaluator(_breed(pop, parents, n_kids, domain, rng, variation))
        log.extend(kids)
        used += n_kids
        elite = int(np.argmax(pop.objectives.sum(axis=1)))
        gen = pop.generation + 1
        pop = Population.concat(pop.take([elite]), Population.from_evaluated(kids))
        pop.generation = gen
    return RunResult(log, pop, trace)


def tournament_select(fitness: np.ndarray, rng: np.random.Generator, size: int = 4) -> int:
    entrants = rng.integers(len(fitness), size=size)
    return int(entrants[np.argmax(fitness[entrants])])


def single_objective_run(evaluator, mu: int, budget: int, variation: VariationConfig | None = None,
                         seed: int = 0, tournament_size: int = 4,
                         algorithm: str = "single-objective") -> RunResult:
    """Tournament GA on raw ground truth, with one ground-truth elite."""
    _check_budget(mu, budget)
    variation = variation or VariationConfig()
    domain = evaluator.domain
    rng = np.random.default_rng(seed)
    log = RunLog(algorithm, seed)
    first = evaluator(domain.random_genotypes(rng, mu))
    log.extend(first)
    pop = Population.from_evaluated(first)
    trace = []
    used = mu
    while used < budget:
        n_kids = min(mu - 1, budget - used)
        parents = [tournament_select(pop.ground_truth, rng, tournament_size)
                   for _ in range(n_kids + n_kids % 2)]
        trace.append(np.asarray(parents, dtype=np.int64))
        kids = evaluator(_breed(pop, parents, n_kids, domain, rng, variation))
        log.extend(kids)
        used += n_kids
        elite = int(np.argmax(pop.ground_truth))
        gen = pop.generation + 1
        pop = Population.concat(pop.take([elite]), Population.from_evaluated(kids))
        pop.generation = gen
    return RunResult(log, pop, trace)
