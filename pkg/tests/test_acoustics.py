import numpy as np
import numpy.testing as npt
import pytest

import oracles
from alberich import acoustics
from conftest import (
    random_cell,
    random_feasible_cell,
    random_lossy_medium,
    random_stack,
)


def _matched_to_water(loss_tangent=0.0):
    m = acoustics.WATER_DENSITY * acoustics.WATER_SPEED**2 * (1.0 + 1j * loss_tangent)
    return acoustics.HomogeneousMedium.fixed("matched", acoustics.WATER_DENSITY, m)


def _constant_poisson_medium(rng, loss_tangent=None):
    """Matrix with shear modulus a real multiple of the longitudinal one."""
    density = rng.uniform(900.0, 1300.0)
    speed = rng.uniform(1200.0, 2200.0)
    tan = rng.uniform(0.0, 0.4) if loss_tangent is None else loss_tangent
    m = density * speed * speed * (1.0 + 1j * tan)
    return acoustics.HomogeneousMedium.fixed("matrix", density, m, shear_pa=m / 400.0)


def test_wave_parameters_branch_and_magnitude():
    rng = np.random.default_rng(0)
    for _ in range(50):
        rho = rng.uniform(100.0, 9000.0)
        m = rng.uniform(1.0e6, 1.0e11) * (1.0 + 1j * rng.uniform(0.0, 0.5))
        f = rng.uniform(1.0, 1.0e5)
        k, z = acoustics.wave_parameters(rho, m, f)
        assert k.imag >= 0.0
        assert z.real > 0.0
        npt.assert_allclose(complex(k) ** 2, (2.0 * np.pi * f) ** 2 * rho / m, rtol=1e-12)
        npt.assert_allclose(complex(z) ** 2, rho * m, rtol=1e-12)


def test_layer_matrix_unit_determinant():
    # drawn from the solver's operating envelope (band-limited, <= 0.1 m)
    rng = np.random.default_rng(1)
    for _ in range(100):
        medium = random_lossy_medium(rng)
        d = rng.uniform(0.0, 0.1)
        f = rng.uniform(10.0, 1.0e4)
        mat = acoustics.layer_matrix(medium, d, f)
        assert abs(np.linalg.det(mat) - 1.0) < 1.0e-12


def test_layer_matrix_limits():
    medium = _matched_to_water()
    npt.assert_allclose(acoustics.layer_matrix(medium, 0.0, 1000.0), np.eye(2), atol=1e-15)
    # half a wavelength: kd = pi, so the two-port is minus the identity
    f = 1000.0
    d = acoustics.WATER_SPEED / (2.0 * f)
    mat = acoustics.layer_matrix(medium, d, f)
    npt.assert_allclose(mat, -np.eye(2), atol=1e-9)
    with pytest.raises(ValueError):
        acoustics.layer_matrix(medium, -0.01, f)
    with pytest.raises(ValueError):
        acoustics.layer_matrix(medium, 0.01, 0.0)


def test_water_slab_in_water_is_transparent():
    stack = acoustics.LayerStack(
        layers=((acoustics.water(), 0.123),),
        front=acoustics.water(),
        back=acoustics.water(),
    )
    for f in (10.0, 440.0, 9876.0):
        r, t, a = acoustics.solve_stack(stack, f)
        assert r < 1.0e-12
        assert abs(t - 1.0) < 1.0e-12
        assert abs(a) < 1.0e-12


def test_zero_thickness_stack_reduces_to_bare_interface():
    layers = tuple((random_lossy_medium(np.random.default_rng(3)), 0.0) for _ in range(4))
    stack = acoustics.LayerStack(layers=layers, front=acoustics.water(), back=acoustics.air())
    r, t, a = acoustics.solve_stack(stack, 500.0)
    ro, to = oracles.interface_matching_rt(
        (acoustics.WATER_DENSITY, acoustics.WATER_DENSITY * acoustics.WATER_SPEED**2),
        [],
        (acoustics.AIR_DENSITY, acoustics.AIR_DENSITY * acoustics.AIR_SPEED**2),
        500.0,
    )
    assert abs(r - ro) < 1.0e-12
    assert abs(t - to) < 1.0e-12
    assert abs(a) < 1.0e-12


def test_lossless_stacks_absorb_nothing():
    rng = np.random.default_rng(4)
    freqs = np.logspace(1.0, 4.0, 40)
    for _ in range(20):
        stack = random_stack(rng, lossy=False)
        resp = acoustics.stack_response(stack, freqs)
        assert np.max(np.abs(resp.absorption)) < 1.0e-10


def test_energy_balance_and_passivity():
    rng = np.random.default_rng(5)
    freqs = np.logspace(1.0, 4.0, 25)
    for _ in range(40):
        stack = random_stack(rng)
        resp = acoustics.stack_response(stack, freqs)
        total = resp.reflection + resp.transmission + resp.absorption
        npt.assert_allclose(total, 1.0, atol=1.0e-9)
        for arr in (resp.reflection, resp.transmission, resp.absorption):
            assert np.all(arr >= 0.0)
            assert np.all(arr <= 1.0 + 1.0e-12)


def test_matches_interface_matching_oracle():
    rng = np.random.default_rng(6)
    for _ in range(30):
        stack = random_stack(rng)
        f = float(rng.uniform(10.0, 1.0e4))
        r, t, _ = acoustics.solve_stack(stack, f)
        front = (stack.front.density, complex(stack.front.longitudinal_pa(f)))
        back = (stack.back.density, complex(stack.back.longitudinal_pa(f)))
        layers = [
            (m.density, complex(m.longitudinal_pa(f)), d) for m, d in stack.layers
        ]
        ro, to = oracles.interface_matching_rt(front, layers, back, f)
        assert abs(r - ro) < 1.0e-10
        assert abs(t - to) < 1.0e-10


def test_lossless_transmission_is_reciprocal():
    rng = np.random.default_rng(7)
    for _ in range(20):
        stack = random_stack(rng, lossy=False)
        f = float(rng.uniform(10.0, 1.0e4))
        _, t_fwd, _ = acoustics.solve_stack(stack, f)
        reversed_stack = acoustics.LayerStack(
            layers=tuple(reversed(stack.layers)), front=stack.back, back=stack.front
        )
        _, t_rev, _ = acoustics.solve_stack(reversed_stack, f)
        assert abs(t_fwd - t_rev) < 1.0e-10


# ---------------------------------------------------------------------------
# homogenization


def test_homogenize_vanishing_voids_recover_matrix():
    rng = np.random.default_rng(8)
    matrix = _constant_poisson_medium(rng)
    eff = acoustics.homogenize_void_layer(matrix, 1.0e-9, 2, 100.0)
    for f in (10.0, 1000.0, 1.0e4):
        m0 = complex(matrix.longitudinal_pa(f))
        npt.assert_allclose(complex(eff.longitudinal_pa(f)), m0, rtol=1.0e-6)
    npt.assert_allclose(eff.density, matrix.density, rtol=1.0e-6)


def test_homogenize_static_limit():
    # far below resonance the Lorentzian is 1: M_eff -> M (1-phi)/(1+phi)
    rng = np.random.default_rng(9)
    matrix = _constant_poisson_medium(rng, loss_tangent=0.0)
    r, h = 6.0, 100.0
    phi = float(acoustics.area_fraction(r, 2, h))
    eff = acoustics.homogenize_void_layer(matrix, r, 2, h)
    m0 = complex(matrix.longitudinal_pa(1.0e-3))
    expected = m0 * (1.0 - phi) / (1.0 + phi)
    npt.assert_allclose(complex(eff.longitudinal_pa(1.0e-3)), expected, rtol=1.0e-4)
    assert eff.density == pytest.approx((1.0 - phi) * matrix.density)


def test_homogenize_resonance_near_predicted_frequency():
    # 1/(1 + phi*L) resonates where (omega0^2 - omega^2) + phi*omega0^2
    # crosses zero, i.e. at omega0 * sqrt(1 + phi)
    rng = np.random.default_rng(10)
    matrix = _constant_poisson_medium(rng, loss_tangent=0.05)
    r_mm, h = 8.0, 100.0
    phi = float(acoustics.area_fraction(r_mm, 2, h))
    g = complex(matrix.shear_pa(1.0))
    f0 = (
        np.sqrt(
            acoustics.MONOPOLE_STIFFNESS_COEFF
            * g.real
            / (matrix.density * (r_mm * acoustics.MM_TO_M) ** 2)
        )
        / (2.0 * np.pi)
    )
    expected = f0 * np.sqrt(1.0 + phi)
    eff = acoustics.homogenize_void_layer(matrix, r_mm, 2, h)
    freqs = np.logspace(np.log10(f0) - 1.0, np.log10(f0) + 1.0, 4001)
    losses = np.array([complex(eff.longitudinal_pa(f)).imag for f in freqs])
    peak = freqs[int(np.argmax(losses))]
    assert abs(peak - expected) / expected < 0.03


def test_homogenize_rejects_dense_void_layers():
    matrix = _constant_poisson_medium(np.random.default_rng(11))
    with pytest.raises(acoustics.InfeasibleGeometryError):
        acoustics.homogenize_void_layer(matrix, 29.0, 2, 100.0)
    with pytest.raises(ValueError):
        acoustics.homogenize_void_layer(acoustics.water(), 5.0, 2, 100.0)


def test_homogenized_medium_stays_passive():
    rng = np.random.default_rng(12)
    freqs = np.logspace(0.0, 5.0, 200)
    for _ in range(25):
        matrix = _constant_poisson_medium(rng)
        r = rng.uniform(1.0, 15.0)
        h = rng.uniform(60.0, 100.0)
        if acoustics.area_fraction(r, 2, h) >= acoustics.MAX_AREA_FRACTION:
            continue
        eff = acoustics.homogenize_void_layer(matrix, r, 2, h)
        m = np.asarray(eff.longitudinal_pa(freqs), dtype=complex)
        assert np.all(m.real > 0.0), f"r={r}, h={h}"
        assert np.all(m.imag >= -1.0e-12 * np.abs(m))


# ---------------------------------------------------------------------------
# unit cells


def test_unit_cell_bounds_and_round_trip():
    rng = np.random.default_rng(13)
    for _ in range(50):
        cell = random_cell(rng)
        npt.assert_allclose(
            acoustics.UnitCell.from_array(cell.as_array()).as_array(), cell.as_array()
        )
    with pytest.raises(ValueError):
        acoustics.UnitCell(0.5, 8.0, 30.0, 60.0, 30.0, 70.0, 30.0, 70.0, 100.0, 100.0)
    with pytest.raises(ValueError):
        acoustics.UnitCell(4.0, 8.0, 30.0, 60.0, 30.0, 70.0, 30.0, 70.0, 100.0, 101.0)
    with pytest.raises(ValueError):
        acoustics.UnitCell.from_array(np.zeros(9))


def test_clearance_margins_match_independent_check():
    rng = np.random.default_rng(14)
    n_infeasible = 0
    for _ in range(1000):
        cell = random_cell(rng)
        violated = oracles.clearance_violated(cell)
        depth = acoustics.violation_depth_mm(cell)
        assert acoustics.is_feasible(cell) == (not violated)
        assert (depth > 0.0) == violated
        n_infeasible += violated
    assert n_infeasible > 900  # tight bounds: most uniform draws violate something


def test_violation_depth_examples():
    ok = acoustics.UnitCell(4.0, 4.0, 20.0, 60.0, 50.0, 50.0, 50.0, 50.0, 100.0, 100.0)
    assert acoustics.violation_depth_mm(ok) == 0.0
    # front float distance D1 - r1 = 5 mm, 5 short of the 10 mm clearance
    bad = acoustics.UnitCell(15.0, 4.0, 20.0, 60.0, 50.0, 50.0, 50.0, 50.0, 100.0, 100.0)
    assert not acoustics.is_feasible(bad)
    assert acoustics.violation_depth_mm(bad) == pytest.approx(5.0)


def test_sublayer_thicknesses_sum_to_coating():
    rng = np.random.default_rng(15)
    for _ in range(100):
        cell = random_cell(rng)
        assert sum(acoustics.sublayer_thicknesses_mm(cell)) == pytest.approx(cell.t)


def test_cell_to_stack_layout(pu):
    rng = np.random.default_rng(16)
    cell = random_feasible_cell(rng)
    stack = acoustics.cell_to_stack(cell, pu, with_backing=True)
    assert len(stack.layers) == 6
    assert stack.back.name == "air"
    total_mm = sum(d for _, d in stack.layers) / acoustics.MM_TO_M
    assert total_mm == pytest.approx(cell.t + acoustics.STEEL_BACKING_MM)
    assert stack.layers[-1][0].name == "steel"

    free = acoustics.cell_to_stack(cell, pu, with_backing=False)
    assert len(free.layers) == 5
    assert free.back.name == "water"
    assert sum(d for _, d in free.layers) / acoustics.MM_TO_M == pytest.approx(cell.t)


def test_cell_to_stack_rejects_crossed_layers(pu):
    crossed = acoustics.UnitCell(
        10.0, 10.0, 55.0, 60.0, 50.0, 50.0, 50.0, 50.0, 100.0, 100.0
    )
    with pytest.raises(acoustics.InfeasibleGeometryError):
        acoustics.cell_to_stack(crossed, pu)


def test_absorption_spectrum_validates_frequencies(pu):
    cell = random_feasible_cell(np.random.default_rng(17))
    with pytest.raises(ValueError):
        acoustics.absorption_spectrum(cell, pu, np.array([100.0, 50.0]))
    with pytest.raises(ValueError):
        acoustics.absorption_spectrum(cell, pu, np.array([-1.0, 50.0]))


# ---------------------------------------------------------------------------
# peak finding


def test_first_peak_on_synthetic_bump():
    f = np.logspace(1.0, 4.0, 200)
    bump = np.exp(-(((np.log10(f) - 3.0) / 0.25) ** 2))
    peak = acoustics.first_peak_frequency(f, bump)
    assert peak == pytest.approx(1000.0, rel=1.0e-3)
    assert acoustics.first_peak_frequency(f, np.linspace(0.0, 1.0, 200)) is None
    assert acoustics.first_peak_frequency(f, np.linspace(1.0, 0.0, 200)) is None


def test_first_peak_picks_first_of_two():
    f = np.logspace(1.0, 4.0, 400)
    x = np.log10(f)
    two = np.exp(-(((x - 2.0) / 0.15) ** 2)) + 2.0 * np.exp(-(((x - 3.5) / 0.15) ** 2))
    peak = acoustics.first_peak_frequency(f, two)
    assert peak == pytest.approx(100.0, rel=1.0e-2)


def test_first_peak_refinement_at_least_grid_accurate():
    rng = np.random.default_rng(18)
    f = np.logspace(1.0, 4.0, 120)
    step = np.log10(f[1]) - np.log10(f[0])
    for _ in range(20):
        center = rng.uniform(1.5, 3.5)
        width = rng.uniform(0.2, 0.5)
        curve = np.exp(-(((np.log10(f) - center) / width) ** 2))
        refined = acoustics.first_peak_frequency(f, curve)
        naive = oracles.naive_first_peak(f, curve)
        assert naive is not None and refined is not None
        assert abs(np.log10(refined) - np.log10(naive)) <= step
        assert abs(np.log10(refined) - center) < 0.5 * step


# ---------------------------------------------------------------------------
# directional trends


def _voided_slab(matrix, r_mm, h_mm, t_mm, with_backing=True):
    pu_d = (t_mm - 2.0 * r_mm) / 2.0 * acoustics.MM_TO_M
    layers = [
        (matrix, pu_d),
        (acoustics.homogenize_void_layer(matrix, r_mm, 2, h_mm), 2.0 * r_mm * acoustics.MM_TO_M),
        (matrix, pu_d),
    ]
    if with_backing:
        layers.append((acoustics.steel(), acoustics.STEEL_BACKING_MM * acoustics.MM_TO_M))
        back = acoustics.air()
    else:
        back = acoustics.water()
    return acoustics.LayerStack(tuple(layers), acoustics.water(), back)


def test_first_peak_drops_with_void_radius():
    matrix = _constant_poisson_medium(np.random.default_rng(19), loss_tangent=0.2)
    freqs = np.logspace(1.0, 4.0, 400)
    peaks = []
    for r in (6.0, 9.0, 12.0):
        resp = acoustics.stack_response(_voided_slab(matrix, r, 100.0, 60.0), freqs)
        peaks.append(acoustics.first_peak_frequency(freqs, resp.absorption))
    assert all(p is not None for p in peaks)
    assert peaks[0] > peaks[1] > peaks[2]


def test_first_peak_rises_with_matrix_stiffness():
    rng = np.random.default_rng(20)
    density, speed, tan = 1100.0, 1600.0, 0.2
    m = density * speed * speed * (1.0 + 1j * tan)
    soft = acoustics.HomogeneousMedium.fixed("soft", density, m, shear_pa=m / 400.0)
    stiff = acoustics.HomogeneousMedium.fixed(
        "stiff", density, 4.0 * m.real + 1j * m.imag, shear_pa=(4.0 * m.real + 1j * m.imag) / 400.0
    )
    freqs = np.logspace(1.0, 4.0, 400)
    peak_soft = acoustics.first_peak_frequency(
        freqs, acoustics.stack_response(_voided_slab(soft, 8.0, 100.0, 60.0), freqs).absorption
    )
    peak_stiff = acoustics.first_peak_frequency(
        freqs, acoustics.stack_response(_voided_slab(stiff, 8.0, 100.0, 60.0), freqs).absorption
    )
    assert peak_soft is not None and peak_stiff is not None
    assert peak_stiff > peak_soft


def test_backing_cuts_transmission_three_orders(pu):
    # The steel + air termination should knock peak transmission down by
    # >= 3 orders of magnitude over the 10 Hz - 10 kHz band. At 10 Hz the
    # whole coating is acoustically thin, so the backed stack approaches the
    # bare water-to-air interface, whose power transmission
    # 4*Zw*Za/(Zw+Za)^2 = 1.11e-3 bounds the achievable reduction: the free
    # stack transmits at most 1, so the ratio cannot exceed ~900. The
    # intended contrast holds in the kHz range but not over the full band.
    cell = acoustics.UnitCell(4.0, 4.0, 20.0, 60.0, 50.0, 50.0, 50.0, 50.0, 100.0, 100.0)
    freqs = np.logspace(1.0, 4.0, 200)
    backed = acoustics.absorption_spectrum(cell, pu, freqs, with_backing=True)
    free = acoustics.absorption_spectrum(cell, pu, freqs, with_backing=False)
    assert np.max(backed.transmission) <= np.max(free.transmission) / 1.0e3


# ---------------------------------------------------------------------------
# file formats


def test_spectrum_csv_round_trip(tmp_path, pu):
    cell = random_feasible_cell(np.random.default_rng(21))
    freqs = np.logspace(1.0, 4.0, 30)
    resp = acoustics.absorption_spectrum(cell, pu, freqs)
    path = tmp_path / "spectrum.csv"
    acoustics.write_spectrum_csv(path, resp)
    back = acoustics.read_spectrum_csv(path)
    npt.assert_allclose(back.frequency_hz, resp.frequency_hz, rtol=1.0e-11)
    npt.assert_allclose(back.reflection, resp.reflection, rtol=1.0e-9, atol=1.0e-15)
    npt.assert_allclose(back.transmission, resp.transmission, rtol=1.0e-9, atol=1.0e-15)
    npt.assert_allclose(back.absorption, resp.absorption, rtol=1.0e-9, atol=1.0e-15)
    with pytest.raises(ValueError):
        (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
        acoustics.read_spectrum_csv(tmp_path / "bad.csv")


def test_stack_dump_lists_layers(tmp_path, pu):
    import json

    cell = random_feasible_cell(np.random.default_rng(22))
    path = tmp_path / "stack.json"
    acoustics.dump_stack_json(path, cell, pu, 1000.0)
    dump = json.loads(path.read_text())
    assert dump["frequency_hz"] == 1000.0
    assert len(dump["layers"]) == 6
    assert all(e["thickness_m"] >= 0.0 for e in dump["layers"])
    assert all(e["modulus_re"] > 0.0 for e in dump["layers"])
