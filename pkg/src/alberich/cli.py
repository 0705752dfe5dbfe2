"""Command-line front end.

Subcommands: mastercurve, sweep, gen-dataset, train, optimize, benchmark,
report.  Each accepts --config (JSON, top-level keys material / sampling /
training / ga / objective / paths) and --seed, which overrides the manifest
seed from the config.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 infeasible-dominated run.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, acoustics, inverse, materials, pipeline, rheology, svgreport
from . import surrogate as surrogate_mod


class ConfigError(ValueError):
    pass


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as handle:
            config = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    return config


def _section(config, name):
    value = config.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return value


def material_from_config(config):
    """Returns (material, name).  Defaults to the built-in reference fixture."""
    section = _section(config, "material")
    name = section.get("name", "reference-pu")
    if "constants" in section:
        _, material = materials.read_material_constants(section["constants"])
        return material, name
    if "master_curve" in section:
        csv_path = Path(section["master_curve"])
        sidecar = Path(section.get("master_curve_sidecar", csv_path.with_suffix(".json")))
        curve, _ = rheology.read_master_curve(csv_path, sidecar)
        return (
            materials.ViscoelasticMaterial(
                name=name,
                density=float(section.get("density", materials.PU_DENSITY)),
                poisson=float(section.get("poisson", materials.PU_POISSON)),
                curve=curve,
            ),
            name,
        )
    return materials.reference_polyurethane(), name


def manifest_seed_of(args, config):
    if args.seed is not None:
        return int(args.seed)
    return int(config.get("seed", 0))


def sampling_plan_from_config(config, seed):
    section = _section(config, "sampling")
    profile = section.get("profile")
    if profile == "ci":
        plan = pipeline.SamplingPlan.ci(seed=seed)
        if "n_designs" not in section and "points" not in section:
            return plan
    n_designs = int(section.get("n_designs", 400))
    points = int(section.get("points", pipeline.DATASET_FREQUENCY_POINTS))
    grid_kind = section.get("grid", "log")
    if grid_kind == "log":
        grid = pipeline.log_grid(points)
    elif grid_kind == "linear":
        grid = pipeline.linear_grid(points)
    else:
        raise ConfigError(f"unknown sampling grid {grid_kind!r} (use 'log' or 'linear')")
    return pipeline.SamplingPlan(n_designs=n_designs, frequency_hz=grid, seed=seed)


def train_config_from_config(config, seed):
    section = _section(config, "training")
    defaults = surrogate_mod.TrainConfig()
    try:
        return surrogate_mod.TrainConfig(
            learning_rate=float(section.get("learning_rate", defaults.learning_rate)),
            batch_size=int(section.get("batch_size", defaults.batch_size)),
            epochs=int(section.get("epochs", defaults.epochs)),
            beta1=float(section.get("beta1", defaults.beta1)),
            beta2=float(section.get("beta2", defaults.beta2)),
            epsilon=float(section.get("epsilon", defaults.epsilon)),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"bad training config: {exc}")


def ga_config_from_config(config, seed):
    section = _section(config, "ga")
    defaults = inverse.GaConfig()
    try:
        return inverse.GaConfig(
            population=int(section.get("population", defaults.population)),
            generations=int(section.get("generations", defaults.generations)),
            crossover_rate=float(section.get("crossover_rate", defaults.crossover_rate)),
            blend_alpha=float(section.get("blend_alpha", defaults.blend_alpha)),
            mutation_rate=float(section.get("mutation_rate", defaults.mutation_rate)),
            mutation_scale=float(section.get("mutation_scale", defaults.mutation_scale)),
            elitism=int(section.get("elitism", defaults.elitism)),
            tournament=int(section.get("tournament", defaults.tournament)),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"bad ga config: {exc}")


def objective_from_config(config):
    section = _section(config, "objective")
    if not section:
        return inverse.ObjectiveSpec.default()
    n = int(section.get("points", inverse.OBJECTIVE_POINTS))
    step = float(section.get("step_hz", inverse.OBJECTIVE_STEP_HZ))
    i = np.arange(1, n + 1, dtype=float)
    return inverse.ObjectiveSpec(frequency_hz=step * i, weights=(n + 1.0 - i) / n)


def out_dir_of(args, config):
    if getattr(args, "out_dir", None):
        directory = Path(args.out_dir)
    else:
        directory = Path(_section(config, "paths").get("out_dir", "."))
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def parse_cell(text):
    """Parse 'r1=5,r2=7,...' (all ten genes) into a UnitCell."""
    values = {}
    for item in text.split(","):
        if "=" not in item:
            raise ConfigError(f"bad cell item {item!r}; expected gene=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in acoustics.GENE_ORDER:
            raise ConfigError(f"unknown gene {key!r}")
        try:
            values[key] = float(raw)
        except ValueError:
            raise ConfigError(f"bad value for {key!r}: {raw!r}")
    missing = [g for g in acoustics.GENE_ORDER if g not in values]
    if missing:
        raise ConfigError(f"cell is missing genes: {', '.join(missing)}")
    try:
        return acoustics.UnitCell(**values)
    except ValueError as exc:
        raise ConfigError(str(exc))


def cmd_mastercurve(args, config):
    if args.dma is not None:
        sweeps = rheology.read_dma_csv(args.dma)
    else:
        sweeps = materials.reference_dma_sweeps()
    reference = args.reference_temp
    if reference is None:
        reference = materials.REFERENCE_TEMPERATURE_C
    curve, shifts = rheology.build_master_curve(sweeps, reference)
    out = out_dir_of(args, config)
    base = out / "master"
    rheology.write_master_curve(
        curve, shifts, base.with_suffix(".csv"), base.with_suffix(".json")
    )
    lo, hi = curve.log10_frequency_range
    print(f"master curve: {len(sweeps)} sweeps, log10 f in [{lo:.2f}, {hi:.2f}]")
    for temperature in sorted(shifts.temperatures_c):
        h, v = shifts.shifts_for(temperature)
        print(f"  T={temperature:+.1f} C  log10 aT={h:+.3f}  log10 bT={v:+.4f}")
    print(f"wrote {base.with_suffix('.csv')} and {base.with_suffix('.json')}")
    return 0


def cmd_sweep(args, config):
    material, _ = material_from_config(config)
    cell = parse_cell(args.cell)
    grid = np.logspace(1, 4, args.points)
    response = acoustics.absorption_spectrum(
        cell, material, grid, with_backing=not args.no_backing
    )
    out = out_dir_of(args, config)
    path = out / "spectrum.csv"
    acoustics.write_spectrum_csv(path, response)
    peak = acoustics.first_peak_frequency(response.frequency_hz, response.absorption)
    peak_text = f"{peak:.0f} Hz" if peak is not None else "none in band"
    print(
        f"sweep: {args.points} points, max A={response.absorption.max():.3f}, "
        f"first peak {peak_text}"
    )
    print(f"wrote {path}")
    if args.svg:
        svg_path = out / "spectrum.svg"
        svgreport.write_svg(
            svg_path,
            svgreport.line_plot(
                [("absorption", response.frequency_hz, response.absorption)],
                title="absorption sweep",
            ),
        )
        print(f"wrote {svg_path}")
    return 0


def cmd_gen_dataset(args, config):
    seed = manifest_seed_of(args, config)
    material, _ = material_from_config(config)
    plan = sampling_plan_from_config(config, pipeline.stage_seed(seed, "sampling"))
    if args.profile == "ci":
        plan = pipeline.SamplingPlan.ci(seed=pipeline.stage_seed(seed, "sampling"))
    build = pipeline.generate_dataset(plan, material)
    out = out_dir_of(args, config)
    path = out / args.out_name
    surrogate_mod.write_dataset_csv(path, build.inputs, build.targets)
    print(
        f"dataset: {build.inputs.shape[0]} rows "
        f"({plan.n_designs} designs x {plan.frequency_hz.size} frequencies), "
        f"{build.n_rejected} designs rejected, {build.elapsed_s:.1f} s"
    )
    print(f"wrote {path}")
    return 0


def cmd_train(args, config):
    seed = manifest_seed_of(args, config)
    inputs, targets = surrogate_mod.read_dataset_csv(args.dataset)
    train_config = train_config_from_config(config, pipeline.stage_seed(seed, "train"))
    trained = pipeline.train_surrogate(
        inputs,
        targets,
        train_config,
        split_seed=pipeline.stage_seed(seed, "split"),
        init_seed=pipeline.stage_seed(seed, "init"),
    )
    _, material_name = material_from_config(config)
    out = out_dir_of(args, config)
    path = out / args.out_name
    surrogate_mod.save_model(
        path,
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
    print(
        f"trained {train_config.epochs} epochs in {trained.train_s:.1f} s: "
        f"test MAPE {trained.mape:.2f} % ({trained.mape_excluded} rows excluded), "
        f"r {trained.pearson_r:.4f}"
    )
    print(f"wrote {path}")
    return 0


def cmd_optimize(args, config):
    seed = manifest_seed_of(args, config)
    material, _ = material_from_config(config)
    ga_config = ga_config_from_config(config, pipeline.stage_seed(seed, "ga"))
    objective = objective_from_config(config)
    net = normalizer = None
    if args.model is not None:
        net, normalizer, _, _, _ = surrogate_mod.load_model(args.model)
    result = inverse.optimize_coating(
        material, ga_config, objective, net=net, normalizer=normalizer
    )
    out = out_dir_of(args, config)
    trace_path = out / "ga_trace.csv"
    inverse.write_trace_csv(trace_path, result.trace)
    spectrum_path = None
    if result.solver_spectrum is not None:
        spectrum_path = out / "best_spectrum.csv"
        acoustics.write_spectrum_csv(spectrum_path, result.solver_spectrum)
    report_path = out / "report.json"
    inverse.write_report(
        report_path,
        result,
        spectrum_path=spectrum_path.name if spectrum_path else None,
        trace_path=trace_path.name,
    )
    genes = ", ".join(
        f"{name}={value:.2f}"
        for name, value in zip(acoustics.GENE_ORDER, result.best.cell.as_array())
    )
    print(f"best ({result.evaluator_kind}): {genes}")
    print(f"objective {result.best.objective:.2f}", end="")
    if result.solver_objective is not None:
        print(f", solver re-check {result.solver_objective:.2f}", end="")
    print()
    if result.flagged:
        print(
            "warning: surrogate/solver disagreement "
            f"{result.disagreement:.1%} exceeds {inverse.DISAGREEMENT_THRESHOLD:.0%}"
        )
    print(f"wrote {report_path}")
    if not result.best.feasible:
        print("error: optimizer finished on an infeasible cell", file=sys.stderr)
        return 4
    return 0


def cmd_benchmark(args, config):
    material, _ = material_from_config(config)
    net, normalizer, _, _, _ = surrogate_mod.load_model(args.model)
    cell = parse_cell(args.cell) if args.cell else _default_cell()
    report = pipeline.coating_benchmark(
        material, net, normalizer, cell, repetitions=args.reps
    )
    print(
        f"benchmark ({report.n_points} points, {report.repetitions} reps): "
        f"surrogate {report.fast_median_s * 1e3:.2f} ms, "
        f"solver {report.slow_median_s * 1e3:.2f} ms, "
        f"ratio {report.ratio:.2f}x"
    )
    if args.out is not None:
        with open(args.out, "w") as handle:
            json.dump(dataclasses.asdict(report), handle, indent=2, sort_keys=True)
            handle.write("\n")
        print(f"wrote {args.out}")
    return 0


def _default_cell():
    return acoustics.UnitCell(
        r1=8.0, r2=8.0, D1=30.0, D2=70.0, B1=40.0, B2=40.0, B3=40.0, B4=40.0,
        h=100.0, t=100.0,
    )


def cmd_report(args, config):
    spectra = []
    for path in args.spectrum:
        response = acoustics.read_spectrum_csv(path)
        spectra.append((Path(path).stem, response))
    cells = []
    if args.cell:
        cells.append(("design", parse_cell(args.cell)))
    out = out_dir_of(args, config)
    created = pipeline.emit_report(out, spectra, cells=cells)
    for path in created:
        print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="alberich",
        description="voided viscoelastic coating design toolkit",
    )
    parser.add_argument("--version", action="version", version=f"alberich {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def common(sub):
        sub.add_argument("--config", default=None, help="JSON config file")
        sub.add_argument("--seed", type=int, default=None, help="manifest seed override")
        sub.add_argument("--out-dir", default=None, help="output directory")

    p = subparsers.add_parser("mastercurve", help="build a master curve from DMA sweeps")
    common(p)
    p.add_argument("--dma", default=None, help="DMA CSV (default: built-in fixture)")
    p.add_argument("--reference-temp", type=float, default=None)
    p.set_defaults(func=cmd_mastercurve)

    p = subparsers.add_parser("sweep", help="R/T/A spectrum for one unit cell")
    common(p)
    p.add_argument("--cell", required=True, help="r1=..,r2=..,D1=..,... (all ten genes)")
    p.add_argument("--points", type=int, default=500)
    p.add_argument("--no-backing", action="store_true", help="water-backed half space")
    p.add_argument("--svg", action="store_true", help="also render an SVG plot")
    p.set_defaults(func=cmd_sweep)

    p = subparsers.add_parser("gen-dataset", help="sample designs and label with the solver")
    common(p)
    p.add_argument("--profile", choices=["ci", "full"], default="full")
    p.add_argument("--out-name", default="dataset.csv")
    p.set_defaults(func=cmd_gen_dataset)

    p = subparsers.add_parser("train", help="train the surrogate on a dataset CSV")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-name", default="model.json")
    p.set_defaults(func=cmd_train)

    p = subparsers.add_parser("optimize", help="genetic inverse design")
    common(p)
    p.add_argument("--model", default=None, help="surrogate model JSON (default: solver)")
    p.set_defaults(func=cmd_optimize)

    p = subparsers.add_parser("benchmark", help="surrogate vs solver sweep timing")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--cell", default=None)
    p.add_argument("--reps", type=int, default=pipeline.BENCHMARK_REPETITIONS)
    p.add_argument("--out", default=None, help="write the timing report JSON here")
    p.set_defaults(func=cmd_benchmark)

    p = subparsers.add_parser("report", help="render SVG/CSV bundle from spectrum CSVs")
    common(p)
    p.add_argument("--spectrum", action="append", required=True,
                   help="spectrum CSV (repeatable)")
    p.add_argument("--cell", default=None, help="optional cell for a schematic")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except pipeline.InfeasibleSamplingError as exc:
        print(f"infeasible run: {exc}", file=sys.stderr)
        return 4
    except acoustics.InfeasibleGeometryError as exc:
        print(f"infeasible geometry: {exc}", file=sys.stderr)
        return 4
    except rheology.MasterCurveError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except surrogate_mod.TrainingDivergedError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
