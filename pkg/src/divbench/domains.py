"""Benchmark problems: the two deceptive mazes and a knight's-tour board.

A domain turns a genotype into a fixed-size phenotype vector plus a scalar
ground-truth fitness (higher is better).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from divbench import kernels

CONTACT_EPS = 1e-6
DEFAULT_GOAL_RADIUS = 5.0
DEFAULT_SAMPLES = 16
MAZE_STEPS = 32
STEP_LENGTH = {"medium": 12.0, "hard": 20.0}


class DomainError(ValueError):
    """Bad domain configuration or a genotype outside the declared box."""


def _point_in_polygon(pt, poly) -> bool:
    # even-odd ray cast; points on an edge count as outside
    x, y = pt
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if _on_segment(pt, (x1, y1), (x2, y2)):
            return False
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside


def _on_segment(p, a, b, tol=1e-12) -> bool:
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if abs(cross) > tol:
        return False
    return (min(a[0], b[0]) - tol <= p[0] <= max(a[0], b[0]) + tol
            and min(a[1], b[1]) - tol <= p[1] <= max(a[1], b[1]) + tol)


@dataclass(frozen=True)
class MazeMap:
    walls: np.ndarray  # (W, 2, 2)
    boundary: np.ndarray  # (B, 2), closed implicitly
    start: tuple[float, float]
    goal: tuple[float, float]
    goal_radius: float = DEFAULT_GOAL_RADIUS

    def __post_init__(self):
        walls = np.asarray(self.walls, dtype=np.float64).reshape(-1, 2, 2)
        boundary = np.asarray(self.boundary, dtype=np.float64)
        object.__setattr__(self, "walls", walls)
        object.__setattr__(self, "boundary", boundary)
        object.__setattr__(self, "start", (float(self.start[0]), float(self.start[1])))
        object.__setattr__(self, "goal", (float(self.goal[0]), float(self.goal[1])))
        if boundary.ndim != 2 or boundary.shape[0] < 3 or boundary.shape[1] != 2:
            raise DomainError("boundary must be a polygon with at least 3 vertices")
        if not self.goal_radius > 0:
            raise DomainError("goal_radius must be positive")
        lengths = np.hypot(*(walls[:, 1] - walls[:, 0]).T)
        if np.any(lengths == 0):
            raise DomainError("zero-length wall segment")
        poly = boundary.tolist()
        for name in ("start", "goal"):
            if not _point_in_polygon(getattr(self, name), poly):
                raise DomainError(f"{name} is not strictly inside the boundary")
        if math.dist(self.start, self.goal) <= self.goal_radius:
            raise DomainError("start lies within goal_radius of the goal")

    @cached_property
    def boundary_segments(self) -> np.ndarray:
        return np.stack([self.boundary, np.roll(self.boundary, -1, axis=0)], axis=1)

    @cached_property
    def segments(self) -> np.ndarray:
        """All blocking segments as rows ``(x1, y1, x2, y2)``, walls first."""
        segs = np.concatenate([self.walls, self.boundary_segments], axis=0)
        return np.ascontiguousarray(segs.reshape(-1, 4))

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.boundary.min(axis=0)
        hi = self.boundary.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @cached_property
    def _norm(self) -> tuple[np.ndarray, np.ndarray]:
        x0, y0, x1, y1 = self.bbox
        return np.array([x0, y0]), np.array([x1 - x0, y1 - y0])

    @property
    def diagonal(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return math.hypot(x1 - x0, y1 - y0)

    def to_dict(self) -> dict:
        return {
            "boundary": self.boundary.tolist(),
            "walls": self.walls.tolist(),
            "start": list(self.start),
            "goal": list(self.goal),
            "goal_radius": self.goal_radius,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> MazeMap:
        try:
            return cls(
                walls=doc["walls"],
                boundary=doc["boundary"],
                start=doc["start"],
                goal=doc["goal"],
                goal_radius=float(doc.get("goal_radius", DEFAULT_GOAL_RADIUS)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"malformed maze document: {exc}") from exc

    @classmethod
    def load(cls, path) -> MazeMap:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def builtin_maze(which: str) -> MazeMap:
    """Return the ``"medium"`` or ``"hard"`` maze."""
    if which not in STEP_LENGTH:
        raise DomainError(f"unknown maze {which!r}; expected one of {sorted(STEP_LENGTH)}")
    text = resources.files("divbench").joinpath("data", f"maze_{which}.json").read_text()
    return MazeMap.from_dict(json.loads(text))


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray  # (n, 2); points[0] is the maze start
    terminated_early: bool
    max_length: float = field(default=0.0)  # nominal path length, used for resampling

    @property
    def final_position(self) -> tuple[float, float]:
        return float(self.points[-1, 0]), float(self.points[-1, 1])


def simulate_maze(g, m: MazeMap, step_length: float) -> Trajectory:
    """Open-loop walk: gene ``g[i]`` is the absolute heading ``pi * g[i]`` of step ``i``.

    A step that would cross a wall stops ``CONTACT_EPS`` short of it; the walk
    ends early once the agent is within ``goal_radius`` of the goal.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 1:
        raise DomainError("maze genotype must be a 1-D vector")
    if not np.all(np.abs(g) <= 1.0):
        raise DomainError("maze genes must lie in [-1, 1]")
    if not step_length > 0:
        raise DomainError("step_length must be positive")
    points, reached = kernels.simulate_open_loop(
        g, m.segments, m.start[0], m.start[1], float(step_length),
        m.goal[0], m.goal[1], m.goal_radius, CONTACT_EPS,
    )
    return Trajectory(points, bool(reached), float(step_length) * g.shape[0])


def maze_fitness(t: Trajectory, m: MazeMap) -> float:
    fx, fy = t.final_position
    return -math.hypot(fx - m.goal[0], fy - m.goal[1])


def maze_phenotype(t: Trajectory, m: MazeMap, k: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Arc-length resampled path, bbox-normalized, flattened as x0, y0, x1, y1, ..."""
    if k < 2:
        raise DomainError("need at least 2 samples")
    max_length = t.max_length
    if max_length <= 0:
        # unknown nominal length: spread samples over the path itself
        d = np.diff(t.points, axis=0)
        max_length = float(np.sum(np.hypot(d[:, 0], d[:, 1]))) if len(d) else 0.0
    if max_length > 0:
        samples = kernels.resample_arclength(t.points, k, max_length)
    else:
        samples = np.repeat(t.points[-1:], k, axis=0)
    lo, span = m._norm
    return np.clip((samples - lo) / span, 0.0, 1.0).reshape(-1)


def knights_tour_evaluate(g, n: int = 5) -> tuple[np.ndarray, float]:
    """Walk knight moves from the corner; fitness counts squares before the first violation."""
    g = np.asarray(g)
    if g.ndim != 1 or g.shape[0] != n * n - 1:
        raise DomainError(f"knight's-tour genotype must have length {n * n - 1}")
    if np.any(g != np.round(g)) or np.any((g < 0) | (g > 7)):
        raise DomainError("knight genes must be integers in 0..7")
    visited, count = kernels.knights_walk(g.astype(np.int64), n)
    return visited.reshape(-1).astype(np.float64), float(count)


def segments_cross(p1, p2, q1, q2, tol: float = 1e-9) -> bool:
    """Proper intersection of segments p1p2 and q1q2.

    Both intersection parameters must lie in ``(tol, 1 - tol)``; touching,
    collinear and parallel configurations do not count.
    """
    rx, ry = p2[0] - p1[0], p2[1] - p1[1]
    sx, sy = q2[0] - q1[0], q2[1] - q1[1]
    denom = rx * sy - ry * sx
    if denom == 0.0:
        return False
    qx, qy = q1[0] - p1[0], q1[1] - p1[1]
    t = (qx * sy - qy * sx) / denom
    u = (qx * ry - qy * rx) / denom
    return tol < t < 1 - tol and tol < u < 1 - tol


def count_wall_crossings(t: Trajectory, m: MazeMap, tol: float = 1e-9) -> int:
    segs = m.segments
    n = 0
    for a, b in zip(t.points[:-1], t.points[1:]):
        if a[0] == b[0] and a[1] == b[1]:
            continue
        for s in segs:
            if segments_cross(a, b, s[:2], s[2:], tol):
                n += 1
    return n


class MazeDomain:
    """Maze navigation with an open-loop heading genome."""

    integer = False
    default_latent_dim = 4
    lower = -1.0
    upper = 1.0

    def __init__(self, maze: MazeMap | str = "medium", steps: int = MAZE_STEPS,
                 step_length: float | None = None, samples: int = DEFAULT_SAMPLES):
        if isinstance(maze, str):
            self.name = f"maze-{maze}"
            step_length = STEP_LENGTH[maze] if step_length is None else step_length
            maze = builtin_maze(maze)
        else:
            self.name = "maze-custom"
            if step_length is None:
                raise DomainError("custom mazes need an explicit step_length")
        if steps < 1 or samples < 2:
            raise DomainError("steps must be >= 1 and samples >= 2")
        self.maze = maze
        self.steps = int(steps)
        self.step_length = float(step_length)
        self.samples = int(samples)

    @property
    def genotype_length(self) -> int:
        return self.steps

    @property
    def phenotype_dim(self) -> int:
        return 2 * self.samples

    @property
    def fitness_offset(self) -> float:
        return self.maze.diagonal

    def is_success(self, fitness: float) -> bool:
        return fitness >= -self.maze.goal_radius

    def random_genotypes(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.genotype_length))

    def check(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (self.genotype_length,):
            raise DomainError(f"expected genotype of length {self.genotype_length}, got shape {g.shape}")
        return g

    def evaluate(self, g) -> tuple[np.ndarray, float]:
        traj = simulate_maze(self.check(g), self.maze, self.step_length)
        return maze_phenotype(traj, self.maze, self.samples), maze_fitness(traj, self.maze)

    def evaluate_many(self, genotypes) -> tuple[np.ndarray, np.ndarray]:
        genotypes = np.asarray(genotypes)
        phen = np.empty((len(genotypes), self.phenotype_dim))
        fit = np.empty(len(genotypes))
        for i, g in enumerate(genotypes):
            phen[i], fit[i] = self.evaluate(g)
        return phen, fit

    def describe(self) -> dict:
        return {"id": self.name, "steps": self.steps, "step_length": self.step_length,
                "samples": self.samples, "maze": self.maze.to_dict()}


class KnightsTourDomain:
    """Knight's walk from the (0, 0) corner on an n-by-n board."""

    integer = True
    default_latent_dim = 8
    lower = 0
    upper = 7

    def __init__(self, n: int = 5):
        if n < 3:
            raise DomainError("board size must be at least 3")
        self.n = int(n)
        self.name = "knights-tour"

    @property
    def genotype_length(self) -> int:
        return self.n * self.n - 1

    @property
    def phenotype_dim(self) -> int:
        return self.n * self.n

    @property
    def fitness_offset(self) -> float:
        return 0.0

    def is_success(self, fitness: float) -> bool:
        return fitness >= self.n * self.n

    def random_genotypes(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.integers(0, 8, size=(n, self.genotype_length)).astype(np.float64)

    def check(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (self.genotype_length,):
            raise DomainError(f"expected genotype of length {self.genotype_length}, got shape {g.shape}")
        return g

    def evaluate(self, g) -> tuple[np.ndarray, float]:
        return knights_tour_evaluate(self.check(g), self.n)

    def evaluate_many(self, genotypes) -> tuple[np.ndarray, np.ndarray]:
        genotypes = np.asarray(genotypes)
        phen = np.empty((len(genotypes), self.phenotype_dim))
        fit = np.empty(len(genotypes))
        for i, g in enumerate(genotypes):
            phen[i], fit[i] = self.evaluate(g)
        return phen, fit

    def describe(self) -> dict:
        return {"id": self.name, "n": self.n}


def make_domain(spec: dict | str):
    """Build a domain from a config entry such as ``{"id": "maze-medium"}``."""
    if isinstance(spec, str):
        spec = {"id": spec}
    spec = dict(spec)
    ident = spec.pop("id", None)
    try:
        return _make_domain(ident, spec)
    except TypeError as exc:
        raise DomainError(f"bad parameters for domain {ident!r}: {exc}") from exc


def _make_domain(ident, spec: dict):
    if ident in ("maze-medium", "maze-hard"):
        return MazeDomain(ident.split("-", 1)[1], **spec)
    if ident == "maze-file":
        path = spec.pop("path", None)
        if path is None:
            raise DomainError("maze-file domain needs a 'path'")
        return MazeDomain(MazeMap.load(Path(path)), **spec)
    if ident == "knights-tour":
        return KnightsTourDomain(**spec)
    raise DomainError(f"unknown domain id {ident!r}")
