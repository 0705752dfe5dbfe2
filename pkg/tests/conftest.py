import numpy as np
import pytest

from alberich import acoustics, materials

# Criterion results registered by test_acceptance.py, echoed after the run.
ACCEPTANCE_LINES = []


def record_criterion(number, name, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    line = f"[criterion {number:2d}] {status}  {name}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pu():
    return materials.reference_polyurethane()


GENE_LOWS = np.array([acoustics.CELL_BOUNDS[g][0] for g in acoustics.GENE_ORDER])
GENE_HIGHS = np.array([acoustics.CELL_BOUNDS[g][1] for g in acoustics.GENE_ORDER])


def random_cell(rng):
    """Uniform in-bounds cell, feasibility not enforced."""
    return acoustics.UnitCell.from_array(rng.uniform(GENE_LOWS, GENE_HIGHS))


def random_feasible_cell(rng):
    while True:
        cell = random_cell(rng)
        if acoustics.is_feasible(cell):
            return cell


def random_lossy_medium(rng, max_loss_tangent=0.3):
    """Consistent passive medium: one complex modulus, Im >= 0."""
    density = rng.uniform(100.0, 8000.0)
    speed = rng.uniform(300.0, 6000.0)
    modulus = density * speed * speed * (1.0 + 1j * rng.uniform(0.0, max_loss_tangent))
    return acoustics.HomogeneousMedium.fixed("random", density, modulus)


def random_stack(rng, n_layers=None, lossy=True, max_thickness_m=0.1):
    """Random finite stack between water and a random (water | air) back side."""
    if n_layers is None:
        n_layers = int(rng.integers(1, 7))
    media = [
        random_lossy_medium(rng, max_loss_tangent=0.3 if lossy else 0.0)
        for _ in range(n_layers)
    ]
    thicknesses = rng.uniform(0.0, max_thickness_m, size=n_layers)
    back = acoustics.air() if rng.random() < 0.5 else acoustics.water()
    return acoustics.LayerStack(
        layers=tuple(zip(media, thicknesses)),
        front=acoustics.water(),
        back=back,
    )
