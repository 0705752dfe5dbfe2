"""Genetic-algorithm inverse design of the coating unit cell.

The optimizer maximizes a frequency-weighted absorption objective over the
ten-gene design space, with a graded manufacturability penalty for cells that
violate the 10 mm edge-clearance rules.  Either the transfer-matrix solver or
a trained surrogate can act as the evaluator; when the surrogate drives the
search, the winning cell is always re-checked against the solver.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import acoustics
from .acoustics import AcousticResponse, UnitCell
from .materials import ViscoelasticMaterial
from . import surrogate as _surrogate

OBJECTIVE_POINTS = 1000
OBJECTIVE_STEP_HZ = 10.0

PENALTY_BASE = 1000.0
PENALTY_SLOPE_PER_MM = 10.0

# Relative gap between the GA objective and the solver re-evaluation of the
# winner above which the report is flagged (surrogate exploitation guard).
DISAGREEMENT_THRESHOLD = 0.05

TRACE_HEADER = ["generation", "best", "mean"]

_GENE_LOWS = np.array([acoustics.CELL_BOUNDS[g][0] for g in acoustics.GENE_ORDER])
_GENE_HIGHS = np.array([acoustics.CELL_BOUNDS[g][1] for g in acoustics.GENE_ORDER])
_GENE_RANGES = _GENE_HIGHS - _GENE_LOWS
_N_GENES = len(acoustics.GENE_ORDER)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Weighted-absorption objective: sum(w_i * a_i) - penalty.

    Weights decrease linearly with frequency, w_i = (N + 1 - i) / N for the
    i-th ascending frequency, so low frequencies dominate the score.
    """

    frequency_hz: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.frequency_hz, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if f.ndim != 1 or f.shape != w.shape:
            raise ValueError("frequencies and weights must be matching 1-D arrays")
        if f.size < 2 or np.any(np.diff(f) <= 0.0):
            raise ValueError("frequencies must be strictly increasing")
        if np.any(np.diff(w) >= 0.0):
            raise ValueError("weights must be strictly decreasing")
        object.__setattr__(self, "frequency_hz", f)
        object.__setattr__(self, "weights", w)

    @classmethod
    def default(cls) -> "ObjectiveSpec":
        n = OBJECTIVE_POINTS
        i = np.arange(1, n + 1, dtype=float)
        return cls(
            frequency_hz=OBJECTIVE_STEP_HZ * i,
            weights=(n + 1.0 - i) / n,
        )

    def score(self, absorption: np.ndarray, penalty: float = 0.0) -> float:
        a = np.asarray(absorption, dtype=float)
        if a.shape != self.weights.shape:
            raise ValueError(
                f"absorption has {a.size} points, objective expects {self.weights.size}"
            )
        if penalty < 0.0:
            raise ValueError("penalty must be non-negative")
        # fsum gives the correctly rounded weighted sum, so the all-ones
        # spectrum scores exactly (N + 1) / 2.
        return math.fsum(self.weights * a) - penalty


def penalty(cell: UnitCell) -> float:
    """Manufacturability penalty: 0 when feasible, else base + slope * depth.

    The graded term gives the GA a gradient back toward the feasible region
    while the base term keeps any violating cell below every feasible one
    (the objective itself never exceeds sum(w) = 500.5).
    """
    depth = acoustics.violation_depth_mm(cell)
    if depth == 0.0:
        return 0.0
    return PENALTY_BASE + PENALTY_SLOPE_PER_MM * depth


@dataclass(frozen=True)
class Candidate:
    cell: UnitCell
    objective: float
    penalty_applied: bool
    feasible: bool

    def __post_init__(self) -> None:
        if not math.isfinite(self.objective):
            raise ValueError("candidate objective must be finite")


@dataclass(frozen=True)
class GaConfig:
    population: int = 60
    generations: int = 120
    crossover_rate: float = 0.9
    blend_alpha: float = 0.5
    mutation_rate: float = 0.1
    mutation_scale: float = 0.05
    elitism: int = 2
    tournament: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        if not 0 <= self.elitism <= self.population:
            raise ValueError("elitism must lie in [0, population]")
        if self.tournament < 1:
            raise ValueError("tournament size must be at least 1")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.blend_alpha < 0.0:
            raise ValueError("blend_alpha must be non-negative")
        if self.mutation_scale <= 0.0:
            raise ValueError("mutation_scale must be positive")


Evaluator = Callable[[UnitCell], float]


def _fitness_of(evaluator: Evaluator, genes: np.ndarray) -> float:
    value = float(evaluator(UnitCell.from_array(genes)))
    if not math.isfinite(value):
        raise ValueError(f"evaluator returned non-finite objective {value!r}")
    return value


def _tournament_pick(rng: np.random.Generator, fitness: np.ndarray, size: int) -> int:
    entrants = rng.integers(0, fitness.size, size=min(size, fitness.size))
    return int(entrants[np.argmax(fitness[entrants])])


def _blend_child(
    rng: np.random.Generator, x: np.ndarray, y: np.ndarray, alpha: float
) -> np.ndarray:
    spread = alpha * np.abs(x - y)
    low = np.minimum(x, y) - spread
    high = np.maximum(x, y) + spread
    return rng.uniform(low, high)


def evolve(evaluator: Evaluator, config: GaConfig) -> tuple[Candidate, np.ndarray]:
    """Run the GA and return the best-ever candidate plus a generation trace.

    The trace has one row per generation, columns (generation, best, mean)
    where best is the best objective seen so far (monotone by construction)
    and mean is the current population average.  Total evaluator calls are
    population * generations.  Identical config and evaluator reproduce the
    trace exactly.
    """
    rng = np.random.default_rng(config.seed)
    population = rng.uniform(
        _GENE_LOWS, _GENE_HIGHS, size=(config.population, _N_GENES)
    )

    best_genes: Optional[np.ndarray] = None
    best_objective = -math.inf
    trace = np.empty((config.generations, 3))

    for generation in range(config.generations):
        fitness = np.array([_fitness_of(evaluator, genes) for genes in population])
        leader = int(np.argmax(fitness))
        if fitness[leader] > best_objective:
            best_objective = float(fitness[leader])
            best_genes = population[leader].copy()
        trace[generation] = (generation, best_objective, fitness.mean())

        if generation == config.generations - 1:
            break

        order = np.argsort(fitness)[::-1]
        elite = population[order[: config.elitism]].copy()
        n_children = config.population - config.elitism
        children = np.empty((n_children, _N_GENES))
        for child_index in range(n_children):
            first = _tournament_pick(rng, fitness, config.tournament)
            second = _tournament_pick(rng, fitness, config.tournament)
            if rng.random() < config.crossover_rate:
                child = _blend_child(
                    rng, population[first], population[second], config.blend_alpha
                )
            else:
                child = population[first].copy()
            mutate = rng.random(_N_GENES) < config.mutation_rate
            noise = rng.normal(0.0, config.mutation_scale * _GENE_RANGES)
            child = child + mutate * noise
            children[child_index] = np.clip(child, _GENE_LOWS, _GENE_HIGHS)
        population = np.vstack([elite, children]) if n_children else elite

    assert best_genes is not None
    cell = UnitCell.from_array(best_genes)
    feasible = acoustics.is_feasible(cell)
    best = Candidate(
        cell=cell,
        objective=best_objective,
        penalty_applied=not feasible,
        feasible=feasible,
    )
    return best, trace


def solver_evaluator(
    material: ViscoelasticMaterial,
    objective: Optional[ObjectiveSpec] = None,
    with_backing: bool = True,
) -> Evaluator:
    """Evaluator backed by the transfer-matrix solver.

    Infeasible cells are scored -penalty(cell) without running the solver:
    their stack decomposition can contain negative sublayers, and the graded
    penalty already dominates any attainable absorption score.
    """
    spec = objective if objective is not None else ObjectiveSpec.default()

    def evaluate(cell: UnitCell) -> float:
        p = penalty(cell)
        if p > 0.0:
            return -p
        response = acoustics.absorption_spectrum(
            cell, material, spec.frequency_hz, with_backing=with_backing
        )
        return spec.score(response.absorption)

    return evaluate


def surrogate_evaluator(
    net: _surrogate.Mlp,
    normalizer: _surrogate.Normalizer,
    objective: Optional[ObjectiveSpec] = None,
) -> Evaluator:
    spec = objective if objective is not None else ObjectiveSpec.default()

    def evaluate(cell: UnitCell) -> float:
        p = penalty(cell)
        if p > 0.0:
            return -p
        absorption = _surrogate.predict_spectrum(net, normalizer, cell, spec.frequency_hz)
        return spec.score(absorption)

    return evaluate


@dataclass(frozen=True)
class OptimizationResult:
    best: Candidate
    trace: np.ndarray
    evaluator_kind: str
    solver_objective: Optional[float]
    solver_spectrum: Optional[AcousticResponse]
    disagreement: Optional[float]
    flagged: bool


def optimize_coating(
    material: ViscoelasticMaterial,
    config: GaConfig,
    objective: Optional[ObjectiveSpec] = None,
    net: Optional[_surrogate.Mlp] = None,
    normalizer: Optional[_surrogate.Normalizer] = None,
    with_backing: bool = True,
) -> OptimizationResult:
    """Optimize the unit cell and ground-truth the winner with the solver.

    When ``net`` is given the GA runs on the surrogate and the winning cell is
    re-evaluated with the transfer-matrix solver; a relative gap above
    DISAGREEMENT_THRESHOLD sets the ``flagged`` bit (reported, not fatal).
    """
    spec = objective if objective is not None else ObjectiveSpec.default()
    if net is not None:
        if normalizer is None:
            raise ValueError("a normalizer is required with a surrogate evaluator")
        evaluator = surrogate_evaluator(net, normalizer, spec)
        kind = "surrogate"
    else:
        evaluator = solver_evaluator(material, spec, with_backing)
        kind = "solver"

    best, trace = evolve(evaluator, config)

    solver_objective: Optional[float] = None
    solver_spectrum: Optional[AcousticResponse] = None
    disagreement: Optional[float] = None
    flagged = False
    if best.feasible:
        solver_spectrum = acoustics.absorption_spectrum(
            best.cell, material, spec.frequency_hz, with_backing=with_backing
        )
        solver_objective = spec.score(solver_spectrum.absorption)
        disagreement = abs(best.objective - solver_objective) / max(
            abs(solver_objective), 1.0
        )
        flagged = kind == "surrogate" and disagreement > DISAGREEMENT_THRESHOLD

    return OptimizationResult(
        best=best,
        trace=trace,
        evaluator_kind=kind,
        solver_objective=solver_objective,
        solver_spectrum=solver_spectrum,
        disagreement=disagreement,
        flagged=flagged,
    )


def write_trace_csv(path, trace: np.ndarray) -> None:
    trace = np.asarray(trace, dtype=float)
    if trace.ndim != 2 or trace.shape[1] != 3:
        raise ValueError("trace must have shape (generations, 3)")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for generation, best, mean in trace:
            writer.writerow([int(generation), f"{best:.12g}", f"{mean:.12g}"])


def write_report(
    path,
    result: OptimizationResult,
    spectrum_path: Optional[str],
    trace_path: Optional[str],
) -> None:
    """Serialize the optimization outcome, including the max-T sanity line."""
    genes = result.best.cell.as_array()
    report = {
        "best_cell_mm": {
            name: float(value) for name, value in zip(acoustics.GENE_ORDER, genes)
        },
        "objective": result.best.objective,
        "penalty_applied": result.best.penalty_applied,
        "feasible": result.best.feasible,
        "evaluator": result.evaluator_kind,
        "solver_objective": result.solver_objective,
        "disagreement": result.disagreement,
        "flagged": result.flagged,
        "max_transmission": (
            float(np.max(result.solver_spectrum.transmission))
            if result.solver_spectrum is not None
            else None
        ),
        "spectrum_csv": spectrum_path,
        "trace_csv": trace_path,
    }
    with open(path, "w") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")
