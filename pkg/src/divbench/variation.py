"""Mutation and crossover shared by every algorithm, so comparisons isolate selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class VariationConfig:
    sigma: float = 0.1  # Gaussian step as a fraction of the gene box width
    reset_prob: float | None = None  # integer genes; None means 1 / genotype_length
    crossover_rate: float = 0.9


def mutate(g: np.ndarray, domain, rng: np.random.Generator, cfg: VariationConfig) -> np.ndarray:
    """Gaussian perturbation with clamping for real genes, random reset for integer genes."""
    if domain.integer:
        p = cfg.reset_prob if cfg.reset_prob is not None else 1.0 / g.shape[0]
        mask = rng.random(g.shape[0]) < p
        fresh = rng.integers(domain.lower, domain.upper + 1, size=g.shape[0])
        return np.where(mask, fresh, g).astype(np.float64)
    width = domain.upper - domain.lower
    child = g + rng.normal(0.0, cfg.sigma * width, size=g.shape[0])
    return np.clip(child, domain.lower, domain.upper)


def uniform_crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator,
                      rate: float) -> tuple[np.ndarray, np.ndarray]:
    if rng.random() >= rate:
        return a.copy(), b.copy()
    mask = rng.random(a.shape[0]) < 0.5
    return np.where(mask, a, b), np.where(mask, b, a)
