"""MAP-Elites on a grid over the learned measure space."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from divbench.evaluation import LearnedEvaluator, RunLog
from divbench.variation import VariationConfig, mutate

INSERTED = "inserted"
REPLACED = "replaced"
REJECTED = "rejected"


@dataclass(frozen=True)
class ArchiveSpec:
    lower: np.ndarray
    upper: np.ndarray
    cells_per_dim: int = 10

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64).reshape(-1)
        hi = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("lower and upper must be non-empty and the same length")
        if not np.all(lo < hi):
            raise ValueError("archive bounds need lower < upper in every dimension")
        if self.cells_per_dim < 1:
            raise ValueError("cells_per_dim must be >= 1")

    @property
    def n_dims(self) -> int:
        return self.lower.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells_per_dim ** self.n_dims

    @classmethod
    def from_measures(cls, m: np.ndarray, cells_per_dim: int = 10,
                      percentiles: tuple[float, float] = (1.0, 99.0)) -> ArchiveSpec:
        """Bounds from robust percentiles of a measure sample."""
        lo, hi = np.percentile(m, percentiles, axis=0)
        flat = ~(lo < hi)
        # degenerate dimensions still need a non-empty interval
        lo = np.where(flat, lo - 0.5, lo)
        hi = np.where(flat, hi + 0.5, hi)
        return cls(lo, hi, cells_per_dim)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "cells_per_dim": self.cells_per_dim}

    @classmethod
    def from_dict(cls, doc: dict) -> ArchiveSpec:
        return cls(doc["lower"], doc["upper"], int(doc["cells_per_dim"]))


def cell_index(m, spec: ArchiveSpec) -> int:
    """Row-major grid index of ``m`` after clamping into the archive box."""
    m = np.clip(np.asarray(m, dtype=np.float64), spec.lower, spec.upper)
    c = spec.cells_per_dim
    bins = np.floor(c * (m - spec.lower) / (spec.upper - spec.lower)).astype(np.int64)
    bins = np.minimum(bins, c - 1)
    idx = 0
    for b in bins:
        idx = idx * c + int(b)
    return idx


@dataclass
class Elite:
    genotype: np.ndarray
    fitness: float
    measures: np.ndarray


class EliteArchive:
    def __init__(self, spec: ArchiveSpec):
        self.spec = spec
        self.cells: dict[int, Elite] = {}
        self._keys: list[int] = []  # insertion order, for uniform parent sampling

    def __len__(self) -> int:
        return len(self.cells)

    def insert(self, g, fitness: float, m) -> str:
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (self.spec.n_dims,):
            raise ValueError(f"measures of shape {m.shape} do not match a {self.spec.n_dims}-D archive")
        key = cell_index(m, self.spec)
        incumbent = self.cells.get(key)
        if incumbent is None:
            self.cells[key] = Elite(np.array(g, dtype=np.float64), float(fitness), m.copy())
            self._keys.append(key)
            return INSERTED
        if fitness > incumbent.fitness:
            self.cells[key] = Elite(np.array(g, dtype=np.float64), float(fitness), m.copy())
            return REPLACED
        return REJECTED

    def sample(self, rng: np.random.Generator) -> Elite:
        return self.cells[self._keys[int(rng.integers(len(self._keys)))]]

    def best(self) -> Elite | None:
        if not self.cells:
            return None
        return max(self.cells.values(), key=lambda e: e.fitness)

    def export(self) -> list[dict]:
        return [
            {"cell": key, "measures": e.measures.tolist(), "fitness": e.fitness,
             "genotype": e.genotype.tolist()}
            for key, e in sorted(self.cells.items())
        ]

    def to_json(self) -> str:
        return json.dumps(self.export())


def archive_insert(a: EliteArchive, g, fitness: float, m) -> str:
    return a.insert(g, fitness, m)


def qd_score(a: EliteArchive, offset: float) -> float:
    return float(sum(e.fitness + offset for e in a.cells.values()))


def map_elites_run(evaluator: LearnedEvaluator, spec: ArchiveSpec, budget: int, init_count: int,
                   variation: VariationConfig | None = None, seed: int = 0,
                   quality: str = "ground_truth", algorithm: str = "map-elites",
                   ) -> tuple[EliteArchive, RunLog]:
    """Steady-state MAP-Elites with learned measures as descriptors.

    ``quality="predicted"`` ranks elites by the fitness head instead of the
    ground truth (ablation only).
    """
    if not budget >= init_count >= 1:
        raise ValueError("need budget >= init_count >= 1")
    if evaluator.model is None:
        raise ValueError("MAP-Elites needs a learned model for its measures")
    if quality not in ("ground_truth", "predicted"):
        raise ValueError(f"unknown quality source {quality!r}")
    if quality == "predicted" and evaluator.head is None:
        raise ValueError("predicted quality needs a fitness head")
    variation = variation or VariationConfig()
    domain = evaluator.domain
    rng = np.random.default_rng(seed)
    archive = EliteArchive(spec)
    log = RunLog(algorithm, seed)

    def offer(ev):
        log.extend(ev)
        if quality == "ground_truth":
            q = ev.ground_truth
        else:
            q = ev.objectives.sum(axis=1) + evaluator.head.bias
        for i in range(len(ev)):
            archive.insert(ev.genotypes[i], q[i], ev.measures[i])

    offer(evaluator(domain.random_genotypes(rng, init_count)))
    for _ in range(budget - init_count):
        parent = archive.sample(rng)
        offer(evaluator(mutate(parent.genotype, domain, rng, variation)))
    return archive, log
