"""End-to-end acceptance gate: one test per shipped guarantee.

Each test prints a PASS/FAIL line through conftest.record_criterion so the
run log shows the complete scorecard even when individual gates fail.
Set ALBERICH_SMOKE=1 to skip the two long-running gates (full-size
surrogate training, solver-driven inverse design) during development.
"""

import math
import os
import time

import numpy as np
import pytest

import oracles
from alberich import acoustics, inverse, materials, pipeline, surrogate
from conftest import (
    record_criterion,
    random_feasible_cell,
    random_stack,
)

SMOKE = os.environ.get("ALBERICH_SMOKE", "") == "1"


def test_criterion_01_energy_conservation():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst_balance = 0.0
    in_range = True
    for _ in range(1000):
        stack = random_stack(rng)
        freqs = rng.uniform(10.0, 1.0e4, size=100)
        resp = acoustics.stack_response(stack, freqs)
        balance = np.max(
            np.abs(resp.reflection + resp.transmission + resp.absorption - 1.0)
        )
        worst_balance = max(worst_balance, float(balance))
        for arr in (resp.reflection, resp.transmission, resp.absorption):
            if np.any(arr < 0.0) or np.any(arr > 1.0):
                in_range = False
    elapsed = time.perf_counter() - start
    passed = worst_balance < 1.0e-9 and in_range and elapsed < 10.0
    record_criterion(
        1,
        "energy balance on 1000 stacks x 100 frequencies",
        passed,
        f"max |R+T+A-1| = {worst_balance:.2e}, coefficients in [0,1]: {in_range}, "
        f"{elapsed:.1f} s",
    )
    assert passed


def test_criterion_02_oracle_equivalence():
    rng = np.random.default_rng(102)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n_layers = int(rng.integers(2, 7))
        stack = random_stack(rng, n_layers=n_layers)
        for f in rng.uniform(10.0, 1.0e4, size=3):
            f = float(f)
            r, t, _ = acoustics.solve_stack(stack, f)
            front = (stack.front.density, complex(stack.front.longitudinal_pa(f)))
            back = (stack.back.density, complex(stack.back.longitudinal_pa(f)))
            layers = [
                (m.density, complex(m.longitudinal_pa(f)), d) for m, d in stack.layers
            ]
            ro, to = oracles.interface_matching_rt(front, layers, back, f)
            worst = max(worst, abs(r - ro), abs(t - to))
    elapsed = time.perf_counter() - start
    passed = worst < 1.0e-10 and elapsed < 30.0
    record_criterion(
        2,
        "transfer matrix matches interface-matching solver",
        passed,
        f"max |delta R|,|delta T| = {worst:.2e} over 200 stacks, {elapsed:.1f} s",
    )
    assert passed


def test_criterion_03_lossless_null_absorption():
    rng = np.random.default_rng(103)
    freqs = np.logspace(1.0, 4.0, 500)
    worst = 0.0
    for _ in range(10):
        stack = random_stack(rng, lossy=False)
        resp = acoustics.stack_response(stack, freqs)
        worst = max(worst, float(np.max(np.abs(resp.absorption))))
    passed = worst < 1.0e-9
    record_criterion(
        3,
        "lossless stacks absorb nothing over a 500-point sweep",
        passed,
        f"max |A| = {worst:.2e}",
    )
    assert passed


def test_criterion_04_backing_blocks_transmission(pu):
    rng = np.random.default_rng(104)
    freqs = np.logspace(1.0, 4.0, 250)
    worst = 0.0
    for _ in range(50):
        cell = random_feasible_cell(rng)
        resp = acoustics.absorption_spectrum(cell, pu, freqs, with_backing=True)
        worst = max(worst, float(np.max(resp.transmission)))
    passed = worst < 1.0e-4
    record_criterion(
        4,
        "steel-air backing keeps max T below 1e-4",
        passed,
        f"max T = {worst:.3e}; the 10 Hz band edge approaches the bare "
        "water-air interface power floor 1.11e-3, which no passive coating "
        "can undercut",
    )
    assert passed


def test_criterion_05_void_size_trend(pu):
    freqs = np.logspace(1.0, 4.0, 400)
    peaks = []
    for r in (4.0, 6.0, 8.0, 10.0, 12.0):
        cell = acoustics.UnitCell(r, r, 30.0, 70.0, 50.0, 50.0, 50.0, 50.0, 100.0, 100.0)
        resp = acoustics.absorption_spectrum(cell, pu, freqs)
        peaks.append(acoustics.first_peak_frequency(freqs, resp.absorption))
    found = all(p is not None for p in peaks)
    decreasing = found and all(a > b for a, b in zip(peaks, peaks[1:]))
    record_criterion(
        5,
        "first peak drops as void radius grows (r = 4..12 mm)",
        decreasing,
        "peaks " + ", ".join("none" if p is None else f"{p:.0f} Hz" for p in peaks),
    )
    assert decreasing


def test_criterion_06_frequency_dependence_direction(pu):
    frozen = pu.frozen(materials.ANCHOR_FREQUENCY_HZ)
    freqs = np.logspace(1.0, 4.0, 400)
    details = []
    ok = True
    for r in (6.0, 8.0, 10.0):
        cell = acoustics.UnitCell(r, r, 30.0, 70.0, 50.0, 50.0, 50.0, 50.0, 100.0, 100.0)
        dependent = acoustics.first_peak_frequency(
            freqs, acoustics.absorption_spectrum(cell, pu, freqs).absorption
        )
        pinned = acoustics.first_peak_frequency(
            freqs, acoustics.absorption_spectrum(cell, frozen, freqs).absorption
        )
        if dependent is None or pinned is None or dependent <= pinned:
            ok = False
        details.append(
            f"r={r:g}: {dependent and f'{dependent:.0f}'} vs {pinned and f'{pinned:.0f}'} Hz"
        )
    record_criterion(
        6,
        "rising modulus pushes the first peak above the frozen-modulus case",
        ok,
        "; ".join(details),
    )
    assert ok


def test_criterion_07_gradient_check(monkeypatch):
    rng = np.random.default_rng(107)
    architectures = ((3, 5, 4, 1), (2, 6, 1), (4, 3, 3, 3, 1), (5, 8, 8, 1))
    worst = 0.0
    for net_index in range(20):
        sizes = architectures[net_index % len(architectures)]
        monkeypatch.setattr(surrogate, "LAYER_SIZES", sizes)
        net = surrogate.init_mlp(int(rng.integers(1 << 16)))
        for _ in range(5):
            x = rng.uniform(size=(int(rng.integers(2, 8)), sizes[0]))
            y = rng.uniform(size=x.shape[0])
            wg, bg = surrogate.backprop_gradient(net, x, y)
            fd_wg, fd_bg = oracles.fd_gradient(net, x, y, step=1.0e-5)
            analytic = np.concatenate([g.ravel() for g in wg + bg])
            numeric = np.concatenate([g.ravel() for g in fd_wg + fd_bg])
            scale = max(float(np.max(np.abs(numeric))), 1.0e-12)
            worst = max(worst, float(np.max(np.abs(analytic - numeric))) / scale)
    monkeypatch.undo()

    # spot-check a sample of coordinates on the production architecture
    net = surrogate.init_mlp(0)
    x = rng.uniform(size=(5, surrogate.LAYER_SIZES[0]))
    y = rng.uniform(size=5)
    wg, _ = surrogate.backprop_gradient(net, x, y)
    step = 1.0e-5
    spot_worst = 0.0
    for _ in range(20):
        l = int(rng.integers(len(net.weights)))
        i = int(rng.integers(net.weights[l].shape[0]))
        j = int(rng.integers(net.weights[l].shape[1]))
        probe = net.copy()
        probe.weights[l][i, j] += step
        up = surrogate.batch_mse(probe, x, y)
        probe.weights[l][i, j] -= 2.0 * step
        down = surrogate.batch_mse(probe, x, y)
        numeric = (up - down) / (2.0 * step)
        denom = max(abs(numeric), 1.0e-8)
        spot_worst = max(spot_worst, abs(wg[l][i, j] - numeric) / denom)

    passed = worst < 1.0e-4 and spot_worst < 1.0e-4
    record_criterion(
        7,
        "backprop equals central finite differences",
        passed,
        f"max relative error {worst:.2e} over 20 nets x 5 batches; "
        f"production-net spot check {spot_worst:.2e}",
    )
    assert passed


def test_criterion_08_objective_identities():
    spec = inverse.ObjectiveSpec.default()
    all_ones = spec.score(np.ones(1000))
    weight_sum = math.fsum(spec.weights)
    checks = {
        "score(1)=500.5": all_ones == 500.5,
        "w1=1": spec.weights[0] == 1.0,
        "sum(w)=500.5": weight_sum == 500.5,
        "strictly decreasing": bool(np.all(np.diff(spec.weights) < 0.0)),
    }
    passed = all(checks.values())
    record_criterion(
        8,
        "weighted objective identities hold exactly",
        passed,
        ", ".join(f"{k}: {'ok' if v else 'FAIL'}" for k, v in checks.items()),
    )
    assert passed


def test_criterion_09_ci_surrogate_quality(pu):
    start = time.perf_counter()
    plan = pipeline.SamplingPlan.ci(seed=0)
    build = pipeline.generate_dataset(plan, pu)
    cfg = surrogate.TrainConfig(epochs=100, seed=3)
    trained = pipeline.train_surrogate(build.inputs, build.targets, cfg, 1, 2)
    elapsed = time.perf_counter() - start
    passed = trained.mape <= 12.0 and elapsed < 300.0
    record_criterion(
        9,
        "surrogate quality, reduced profile (5000 rows, 100 epochs)",
        passed,
        f"test MAPE {trained.mape:.2f} % ({trained.mape_excluded} rows excluded), "
        f"r {trained.pearson_r:.4f}, {elapsed:.0f} s",
    )
    assert passed


@pytest.mark.skipif(SMOKE, reason="ALBERICH_SMOKE=1 skips the full training run")
def test_criterion_09_full_surrogate_quality(pu):
    start = time.perf_counter()
    plan = pipeline.SamplingPlan(n_designs=150, seed=0)  # 150 x 375 = 56 250 rows
    build = pipeline.generate_dataset(plan, pu)
    cfg = surrogate.TrainConfig(seed=3)  # paper hyperparameters 0.0021/100/800
    trained = pipeline.train_surrogate(build.inputs, build.targets, cfg, 1, 2)
    elapsed = time.perf_counter() - start
    passed = trained.mape <= 5.0 and trained.pearson_r >= 0.98 and elapsed < 7200.0
    record_criterion(
        9,
        "surrogate quality, full profile (56k rows, 800 epochs)",
        passed,
        f"test MAPE {trained.mape:.2f} % ({trained.mape_excluded} rows excluded), "
        f"r {trained.pearson_r:.5f}, {elapsed:.0f} s",
    )
    assert passed


def test_criterion_10_ga_sanity():
    lows = np.array([acoustics.CELL_BOUNDS[g][0] for g in acoustics.GENE_ORDER])
    highs = np.array([acoustics.CELL_BOUNDS[g][1] for g in acoustics.GENE_ORDER])
    ranges = highs - lows
    converged = 0
    monotone = True
    ga_wins = 0
    errors = []
    for seed in range(10):
        target_rng = np.random.default_rng(500 + seed)
        target = target_rng.uniform(lows, highs)

        def evaluate(cell, _t=target):
            z = (cell.as_array() - _t) / ranges
            return -float(np.mean(z * z))

        cfg = inverse.GaConfig(population=40, generations=50, seed=seed)
        best, trace = inverse.evolve(evaluate, cfg)
        rms = float(np.sqrt(-best.objective))
        errors.append(rms)
        if rms <= 0.01:
            converged += 1
        if np.any(np.diff(trace[:, 1]) < 0.0):
            monotone = False

        # paired random search at the identical evaluation budget
        draw_rng = np.random.default_rng(9000 + seed)
        draws = draw_rng.uniform(lows, highs, size=(40 * 50, len(lows)))
        z = (draws - target) / ranges
        random_best = float(np.max(-np.mean(z * z, axis=1)))
        if best.objective >= random_best:
            ga_wins += 1

    passed = converged == 10 and monotone and ga_wins >= 8
    record_criterion(
        10,
        "GA converges on the known-optimum synthetic function",
        passed,
        f"{converged}/10 seeds within 1 % (worst rms {max(errors):.4f}), "
        f"monotone traces: {monotone}, beats random search {ga_wins}/10",
    )
    assert passed


@pytest.mark.skipif(SMOKE, reason="ALBERICH_SMOKE=1 skips the solver-driven GA")
def test_criterion_11_inverse_design_anchors(pu):
    start = time.perf_counter()
    evaluator = inverse.solver_evaluator(pu)

    # reference bar: the best of 1000 uniformly drawn feasible cells
    rng = np.random.default_rng(2024)
    spec = inverse.ObjectiveSpec.default()
    random_best = -np.inf
    for _ in range(1000):
        cell = random_feasible_cell(rng)
        random_best = max(random_best, evaluator(cell))

    # repeated runs, best taken over seeds (the search is multimodal)
    winners = []
    for seed in (42, 7, 11):
        best, _ = inverse.evolve(evaluator, inverse.GaConfig(seed=seed))
        winners.append(best)
    winner = max(winners, key=lambda c: c.objective)
    elapsed = time.perf_counter() - start

    at_bound = winner.cell.t >= 99.5
    margin = winner.objective / random_best if random_best > 0 else np.inf
    passed = winner.feasible and at_bound and margin >= 1.1
    record_criterion(
        11,
        "optimized thickness rides the upper bound and beats random",
        passed,
        f"t = {winner.cell.t:.3f} mm, objective {winner.objective:.1f} vs random "
        f"best {random_best:.1f} ({margin:.2f}x), {elapsed:.0f} s",
    )
    assert passed


def test_criterion_12_pipeline_determinism(pu, tmp_path):
    def run(out):
        return pipeline.run_full(
            out,
            pu,
            manifest_seed=77,
            plan=pipeline.SamplingPlan(
                n_designs=20, frequency_hz=pipeline.linear_grid(5)
            ),
            train_config=surrogate.TrainConfig(epochs=2, batch_size=20),
            ga_config=inverse.GaConfig(population=20, generations=12),
        )

    first = run(tmp_path / "a")
    second = run(tmp_path / "b")
    pairs = [
        ("dataset", first.dataset_csv, second.dataset_csv),
        ("model", first.model_json, second.model_json),
        ("ga trace", first.trace_csv, second.trace_csv),
    ]
    mismatched = [
        name
        for name, a, b in pairs
        if pipeline.file_digest(a) != pipeline.file_digest(b)
    ]
    passed = not mismatched
    record_criterion(
        12,
        "same manifest seed reproduces dataset, model, and GA trace bytes",
        passed,
        "all byte-identical" if passed else f"mismatch in: {', '.join(mismatched)}",
    )
    assert passed
