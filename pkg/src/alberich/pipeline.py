"""End-to-end orchestration: dataset generation, training, inverse design.

Ties the master-curve material model, the layered forward solver, the neural
surrogate and the genetic optimizer together behind one manifest seed, and
emits the CSV/JSON/SVG artifact bundle.  Every stage draws its seed from the
manifest seed through a named SeedSequence spawn, so a single integer
reproduces the whole run byte for byte (single-worker mode).
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__, acoustics, inverse, svgreport
from . import surrogate as surrogate_mod
from .acoustics import AcousticResponse, UnitCell
from .materials import ViscoelasticMaterial

DATASET_FREQUENCY_POINTS = 375
DATASET_BAND_HZ = (10.0, 10_000.0)

CI_DESIGNS = 500
CI_FREQUENCY_POINTS = 10

BENCHMARK_STEP_HZ = 20.0
BENCHMARK_REPETITIONS = 10

# Stage names for deriving per-stage seeds from the manifest seed.
_STAGE_INDEX = {"sampling": 0, "split": 1, "init": 2, "train": 3, "ga": 4}


class InfeasibleSamplingError(RuntimeError):
    """Raised when nearly all sampled designs violate the clearance rules."""


def stage_seed(manifest_seed: int, stage: str) -> int:
    """Deterministic per-stage seed derived from the single manifest seed."""
    try:
        index = _STAGE_INDEX[stage]
    except KeyError:
        raise ValueError(f"unknown pipeline stage {stage!r}") from None
    sequence = np.random.SeedSequence(entropy=manifest_seed, spawn_key=(index,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def log_grid(points: int = DATASET_FREQUENCY_POINTS,
             band_hz: tuple[float, float] = DATASET_BAND_HZ) -> np.ndarray:
    return np.logspace(math.log10(band_hz[0]), math.log10(band_hz[1]), points)


def linear_grid(points: int,
                band_hz: tuple[float, float] = DATASET_BAND_HZ) -> np.ndarray:
    return np.linspace(band_hz[0], band_hz[1], points)


@dataclass(frozen=True)
class SamplingPlan:
    """How many random designs to draw and on which frequency grid."""

    n_designs: int = 400
    frequency_hz: np.ndarray = field(default_factory=log_grid)
    seed: int = 0
    bounds: dict = field(default_factory=lambda: dict(acoustics.CELL_BOUNDS))

    def __post_init__(self) -> None:
        if self.n_designs < 1:
            raise ValueError("n_designs must be at least 1")
        grid = np.asarray(self.frequency_hz, dtype=float)
        if grid.ndim != 1 or grid.size < 1:
            raise ValueError("frequency grid must be a non-empty 1-D array")
        if np.any(np.diff(grid) <= 0.0):
            raise ValueError("frequency grid must be strictly increasing")
        if grid[0] < DATASET_BAND_HZ[0] - 1e-9 or grid[-1] > DATASET_BAND_HZ[1] + 1e-9:
            raise ValueError("frequency grid must lie within [10 Hz, 10 kHz]")
        object.__setattr__(self, "frequency_hz", grid)
        for gene in acoustics.GENE_ORDER:
            if gene not in self.bounds:
                raise ValueError(f"bounds missing gene {gene!r}")

    @classmethod
    def ci(cls, seed: int = 0) -> "SamplingPlan":
        """Reduced smoke-test plan: 500 designs x 10 linear frequencies.

        The linear grid concentrates rows where absorption is appreciably
        nonzero, which is what makes a 100-epoch training run meaningful.
        """
        return cls(
            n_designs=CI_DESIGNS,
            frequency_hz=linear_grid(CI_FREQUENCY_POINTS),
            seed=seed,
        )

    @property
    def n_rows(self) -> int:
        return self.n_designs * int(np.asarray(self.frequency_hz).size)


def sample_feasible_cells(plan: SamplingPlan) -> tuple[list[UnitCell], int]:
    """Draw feasible designs uniformly within bounds; returns (cells, rejected).

    Raises InfeasibleSamplingError when the rejection rate exceeds 99 %
    (bounds misconfiguration guard).
    """
    rng = np.random.default_rng(plan.seed)
    lows = np.array([plan.bounds[g][0] for g in acoustics.GENE_ORDER], dtype=float)
    highs = np.array([plan.bounds[g][1] for g in acoustics.GENE_ORDER], dtype=float)
    # The default design bounds accept only ~1 % of uniform draws, so the
    # misconfiguration guard trips a decade below that (sustained < 0.1 %).
    max_attempts = max(10_000, 1000 * plan.n_designs)
    cells: list[UnitCell] = []
    rejected = 0
    attempts = 0
    while len(cells) < plan.n_designs:
        if attempts >= max_attempts:
            raise InfeasibleSamplingError(
                f"rejected {rejected} of {attempts} sampled designs (> 99 %); "
                "check the sampling bounds"
            )
        attempts += 1
        cell = UnitCell.from_array(rng.uniform(lows, highs))
        if acoustics.is_feasible(cell):
            cells.append(cell)
        else:
            rejected += 1
    return cells, rejected


@dataclass(frozen=True)
class DatasetBuild:
    inputs: np.ndarray
    targets: np.ndarray
    n_designs: int
    n_rejected: int
    elapsed_s: float


def generate_dataset(
    plan: SamplingPlan,
    material: ViscoelasticMaterial,
    with_backing: bool = True,
) -> DatasetBuild:
    """Sample designs, run the forward solver on the grid, stack the rows.

    Row count is exactly n_designs * len(grid); rows for one design are
    contiguous and ordered by ascending frequency.
    """
    start = time.perf_counter()
    cells, rejected = sample_feasible_cells(plan)
    grid = np.asarray(plan.frequency_hz, dtype=float)
    n_freq = grid.size
    inputs = np.empty((plan.n_designs * n_freq, surrogate_mod.LAYER_SIZES[0]))
    targets = np.empty(plan.n_designs * n_freq)
    for i, cell in enumerate(cells):
        response = acoustics.absorption_spectrum(
            cell, material, grid, with_backing=with_backing
        )
        rows = slice(i * n_freq, (i + 1) * n_freq)
        inputs[rows, : len(acoustics.GENE_ORDER)] = cell.as_array()
        inputs[rows, -1] = grid
        targets[rows] = response.absorption
    return DatasetBuild(
        inputs=inputs,
        targets=targets,
        n_designs=plan.n_designs,
        n_rejected=rejected,
        elapsed_s=time.perf_counter() - start,
    )


@dataclass(frozen=True)
class TrainedSurrogate:
    net: surrogate_mod.Mlp
    normalizer: surrogate_mod.Normalizer
    config: surrogate_mod.TrainConfig
    trace: surrogate_mod.TrainingTrace
    mape: float
    mape_excluded: int
    pearson_r: float
    train_s: float


def train_surrogate(
    inputs: np.ndarray,
    targets: np.ndarray,
    config: surrogate_mod.TrainConfig,
    split_seed: int,
    init_seed: int,
) -> TrainedSurrogate:
    """Split, train and score a fresh network; returns model plus metrics."""
    data = surrogate_mod.split(inputs, targets, seed=split_seed)
    normalizer = surrogate_mod.Normalizer.for_design_band()
    net = surrogate_mod.init_mlp(init_seed)
    start = time.perf_counter()
    net, trace = surrogate_mod.train(net, data, config, normalizer)
    elapsed = time.perf_counter() - start
    test_inputs, test_targets = data.subset(surrogate_mod.TAG_TEST)
    predictions = surrogate_mod.forward(net, normalizer.normalize(test_inputs))
    mape_value, excluded = surrogate_mod.mape(predictions, test_targets)
    correlation = surrogate_mod.pearson_r(predictions, test_targets)
    return TrainedSurrogate(
        net=net,
        normalizer=normalizer,
        config=config,
        trace=trace,
        mape=mape_value,
        mape_excluded=excluded,
        pearson_r=correlation,
        train_s=elapsed,
    )


@dataclass(frozen=True)
class BenchmarkReport:
    fast_median_s: float
    slow_median_s: float
    ratio: float
    repetitions: int
    n_points: int


def run_benchmark(
    fast_sweep: Callable[[], object],
    slow_sweep: Callable[[], object],
    repetitions: int = BENCHMARK_REPETITIONS,
    n_points: int = 0,
) -> BenchmarkReport:
    """Median wall time of each sweep callable and the slow/fast ratio."""
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")

    def median_time(sweep: Callable[[], object]) -> float:
        samples = []
        for _ in range(repetitions):
            start = time.perf_counter()
            sweep()
            samples.append(time.perf_counter() - start)
        return float(np.median(samples))

    fast = median_time(fast_sweep)
    slow = median_time(slow_sweep)
    return BenchmarkReport(
        fast_median_s=fast,
        slow_median_s=slow,
        ratio=slow / fast if fast > 0.0 else math.inf,
        repetitions=repetitions,
        n_points=n_points,
    )


def benchmark_grid() -> np.ndarray:
    """The timing protocol sweep: 20 Hz steps up to 10 kHz (500 points)."""
    return np.arange(BENCHMARK_STEP_HZ, DATASET_BAND_HZ[1] + 0.5 * BENCHMARK_STEP_HZ,
                     BENCHMARK_STEP_HZ)


def coating_benchmark(
    material: ViscoelasticMaterial,
    net: surrogate_mod.Mlp,
    normalizer: surrogate_mod.Normalizer,
    cell: UnitCell,
    repetitions: int = BENCHMARK_REPETITIONS,
) -> BenchmarkReport:
    grid = benchmark_grid()

    def solver_sweep() -> None:
        acoustics.absorption_spectrum(cell, material, grid)

    def surrogate_sweep() -> None:
        surrogate_mod.predict_spectrum(net, normalizer, cell, grid)

    return run_benchmark(surrogate_sweep, solver_sweep, repetitions, grid.size)


def emit_report(
    out_dir,
    spectra: Sequence[tuple[str, AcousticResponse]],
    cells: Sequence[tuple[str, UnitCell]] = (),
    traces: Sequence[tuple[str, np.ndarray]] = (),
) -> list[Path]:
    """Write the SVG + CSV bundle; returns the created paths (sorted).

    One absorption plot holding every labelled spectrum, one schematic per
    cell, one trace CSV per optimization run, plus the spectrum CSVs.
    """
    if not spectra:
        raise ValueError("at least one spectrum is required")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    series = [
        (label, response.frequency_hz, response.absorption)
        for label, response in spectra
    ]
    plot_path = out / "absorption.svg"
    svgreport.write_svg(plot_path, svgreport.line_plot(series, title="absorption spectra"))
    created.append(plot_path)
    for label, response in spectra:
        csv_path = out / f"spectrum_{label}.csv"
        acoustics.write_spectrum_csv(csv_path, response)
        created.append(csv_path)
    for label, cell in cells:
        svg_path = out / f"cell_{label}.svg"
        svgreport.write_svg(svg_path, svgreport.cell_schematic(cell))
        created.append(svg_path)
    for label, trace in traces:
        trace_path = out / f"trace_{label}.csv"
        inverse.write_trace_csv(trace_path, trace)
        created.append(trace_path)
    return sorted(created)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    version: str
    created_utc: str
    seed: int
    stage_seeds: dict
    outputs: dict

    def write(self, path) -> None:
        payload = {
            "version": self.version,
            "created_utc": self.created_utc,
            "seed": self.seed,
            "stage_seeds": self.stage_seeds,
            "outputs": self.outputs,
        }
        with open(path, "w") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")


def build_manifest(seed: int, output_paths: Sequence) -> RunManifest:
    return RunManifest(
        version=__version__,
        created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        seed=seed,
        stage_seeds={name: stage_seed(seed, name) for name in _STAGE_INDEX},
        outputs={str(Path(p).name): file_digest(p) for p in output_paths},
    )


@dataclass(frozen=True)
class FullRunResult:
    dataset_csv: Path
    model_json: Path
    report_json: Path
    trace_csv: Path
    spectrum_csv: Path
    manifest_json: Path
    surrogate: TrainedSurrogate
    optimization: inverse.OptimizationResult


def run_full(
    out_dir,
    material: ViscoelasticMaterial,
    manifest_seed: int = 0,
    plan: Optional[SamplingPlan] = None,
    train_config: Optional[surrogate_mod.TrainConfig] = None,
    ga_config: Optional[inverse.GaConfig] = None,
    material_name: str = "reference-pu",
) -> FullRunResult:
    """Dataset -> surrogate -> GA -> artifacts, all riding one manifest seed.

    Per-stage seeds come from stage_seed(); explicit plan/config arguments
    keep their own sizes but have their seed fields overridden so the run
    stays reproducible from the single manifest integer.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    import dataclasses as _dc

    plan = plan if plan is not None else SamplingPlan.ci()
    plan = _dc.replace(plan, seed=stage_seed(manifest_seed, "sampling"))
    build = generate_dataset(plan, material)
    dataset_csv = out / "dataset.csv"
    surrogate_mod.write_dataset_csv(dataset_csv, build.inputs, build.targets)

    train_config = (
        train_config if train_config is not None else surrogate_mod.TrainConfig(epochs=100)
    )
    train_config = _dc.replace(train_config, seed=stage_seed(manifest_seed, "train"))
    trained = train_surrogate(
        build.inputs,
        build.targets,
        train_config,
        split_seed=stage_seed(manifest_seed, "split"),
        init_seed=stage_seed(manifest_seed, "init"),
    )
    model_json = out / "model.json"
    surrogate_mod.save_model(
        model_json,
        trained.net,
        trained.normalizer,
        material_name,
        trained.config,
        {
            "test_mape": trained.mape,
            "test_mape_excluded": trained.mape_excluded,
            "test_pearson_r": trained.pearson_r,
            "final_train_mse": float(trained.trace.train_mse[-1]),
            "final_validation_mse": float(trained.trace.validation_mse[-1]),
        },
    )

    ga_config = ga_config if ga_config is not None else inverse.GaConfig()
    ga_config = _dc.replace(ga_config, seed=stage_seed(manifest_seed, "ga"))
    result = inverse.optimize_coating(
        material,
        ga_config,
        net=trained.net,
        normalizer=trained.normalizer,
    )
    trace_csv = out / "ga_trace.csv"
    inverse.write_trace_csv(trace_csv, result.trace)
    spectrum_csv = out / "best_spectrum.csv"
    if result.solver_spectrum is not None:
        acoustics.write_spectrum_csv(spectrum_csv, result.solver_spectrum)
    report_json = out / "report.json"
    inverse.write_report(
        report_json,
        result,
        spectrum_path=spectrum_csv.name if result.solver_spectrum is not None else None,
        trace_path=trace_csv.name,
    )

    artifact_paths = [dataset_csv, model_json, report_json, trace_csv]
    if result.solver_spectrum is not None:
        artifact_paths.append(spectrum_csv)
    manifest_json = out / "manifest.json"
    build_manifest(manifest_seed, artifact_paths).write(manifest_json)

    return FullRunResult(
        dataset_csv=dataset_csv,
        model_json=model_json,
        report_json=report_json,
        trace_csv=trace_csv,
        spectrum_csv=spectrum_csv,
        manifest_json=manifest_json,
        surrogate=trained,
        optimization=result,
    )
