"""Turning genotypes into everything an algorithm or a log needs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from divbench import reducer


@dataclass
class Evaluated:
    genotypes: np.ndarray  # (n, L)
    ground_truth: np.ndarray  # (n,)
    measures: np.ndarray | None = None  # (n, D_z)
    objectives: np.ndarray | None = None  # (n, D_z), maximize

    def __len__(self) -> int:
        return len(self.ground_truth)


class LearnedEvaluator:
    """Domain evaluation followed by the frozen learned model.

    ``evaluations`` counts every genotype passed through, which is how budget
    accounting is audited.
    """

    def __init__(self, domain, model: reducer.VaeModel | None = None,
                 head: reducer.FitnessHead | None = None):
        if model is not None and model.input_dim != domain.phenotype_dim:
            raise reducer.ReducerError(
                f"model expects phenotypes of size {model.input_dim}, "
                f"domain {domain.name} produces {domain.phenotype_dim}")
        if head is not None and model is None:
            raise reducer.ReducerError("a fitness head needs its encoder")
        self.domain = domain
        self.model = model
        self.head = head
        self.evaluations = 0

    @property
    def n_objectives(self) -> int:
        return 0 if self.head is None else self.model.latent_dim

    def __call__(self, genotypes) -> Evaluated:
        genotypes = np.atleast_2d(np.asarray(genotypes, dtype=np.float64))
        phen, fit = self.domain.evaluate_many(genotypes)
        self.evaluations += len(genotypes)
        m = objs = None
        if self.model is not None:
            m = reducer.measures(self.model, phen)
            if self.head is not None:
                objs = m * self.head.weights
        return Evaluated(genotypes, fit, m, objs)


@dataclass
class RunRecord:
    algorithm: str
    seed: int
    eval_index: int
    ground_truth: float
    measures: np.ndarray | None
    objectives: np.ndarray | None


@dataclass
class RunLog:
    """Column store of one run's evaluations; ``eval`` indices run 1..budget."""

    algorithm: str
    seed: int
    ground_truth: list = field(default_factory=list)
    measures: list = field(default_factory=list)
    objectives: list = field(default_factory=list)

    def extend(self, ev: Evaluated):
        self.ground_truth.extend(ev.ground_truth.tolist())
        if ev.measures is not None:
            self.measures.extend(ev.measures)
        if ev.objectives is not None:
            self.objectives.extend(ev.objectives)

    def __len__(self) -> int:
        return len(self.ground_truth)

    def best_so_far(self) -> np.ndarray:
        return np.maximum.accumulate(np.asarray(self.ground_truth, dtype=np.float64))

    def arrays(self) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
        gt = np.asarray(self.ground_truth, dtype=np.float64)
        m = np.asarray(self.measures, dtype=np.float64) if self.measures else None
        o = np.asarray(self.objectives, dtype=np.float64) if self.objectives else None
        return gt, m, o

    def records(self):
        gt, m, o = self.arrays()
        for i in range(len(gt)):
            yield RunRecord(self.algorithm, self.seed, i + 1, float(gt[i]),
                            None if m is None else m[i], None if o is None else o[i])
