"""Normal-incidence acoustics of layered voided coatings via transfer matrices.

A coating is modelled as a 1D stack of homogeneous layers between two
half-spaces (water in front; air, or water again, behind). Each layer
contributes a 2x2 acoustic two-port matrix

    [[cos(kd), i Z sin(kd)], [i sin(kd)/Z, cos(kd)]]

with wavenumber k = omega*sqrt(rho/M) on the branch with non-negative
imaginary part and impedance Z = sqrt(rho*M) (principal root). Chaining
the matrices and applying the half-space impedances gives the pressure
reflection and transmission amplitudes, from which the power coefficients
R, T, and A = 1 - R - T follow.

Layers of cylindrical voids are replaced by an effective medium: reduced
density and a longitudinal modulus softened by a Lorentzian monopole
resonance whose stiffness comes from the matrix shear modulus over the
void radius. The damping combines the matrix loss tangent with a
radiative term proportional to the void area fraction; the sign of the
damping term is fixed by passivity (effective modulus keeps a
non-negative imaginary part under the storage + i*loss convention), which
keeps every power coefficient inside [0, 1].

Cell geometry lives in millimetres, matching the design-variable bounds,
and is converted to SI exactly once when a cell is mapped to its stack.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .materials import (
    AIR_DENSITY,
    AIR_SPEED,
    STEEL_DENSITY,
    STEEL_POISSON,
    STEEL_YOUNGS,
    WATER_DENSITY,
    WATER_SPEED,
    longitudinal_from_youngs,
    shear_from_youngs,
)

MM_TO_M = 1.0e-3
STEEL_BACKING_MM = 30.0
EDGE_CLEARANCE_MM = 10.0
VOIDS_PER_LAYER = 2
MAX_AREA_FRACTION = 0.9

# Monopole homogenization closure: model constants, kept in one place.
# omega0^2 = MONOPOLE_STIFFNESS_COEFF * Re{G} / (rho_matrix * r^2)
# gamma    = omega0 * (Im{G}/Re{G} + RADIATIVE_DAMPING_COEFF * phi)
MONOPOLE_STIFFNESS_COEFF = 2.5
RADIATIVE_DAMPING_COEFF = 0.5

# Design-variable bounds, mm.
CELL_BOUNDS = {
    "r1": (1.0, 15.0),
    "r2": (1.0, 15.0),
    "D1": (10.0, 80.0),
    "D2": (10.0, 80.0),
    "B1": (10.0, 80.0),
    "B2": (10.0, 80.0),
    "B3": (10.0, 80.0),
    "B4": (10.0, 80.0),
    "h": (30.0, 100.0),
    "t": (30.0, 100.0),
}
GENE_ORDER = ("r1", "r2", "D1", "D2", "B1", "B2", "B3", "B4", "h", "t")


class InfeasibleGeometryError(ValueError):
    """Cell cannot be mapped to a physical 1D stack."""


@dataclass(frozen=True)
class HomogeneousMedium:
    """Density plus complex longitudinal modulus as a function of frequency.

    ``longitudinal_pa`` (and, where known, ``shear_pa``) accept a scalar
    or array frequency in Hz and return Pa; constants are fine since the
    solver broadcasts.
    """

    name: str
    density: float
    longitudinal_pa: Callable
    shear_pa: Callable | None = None

    def __post_init__(self):
        if self.density <= 0.0:
            raise ValueError("density must be positive")

    @staticmethod
    def fixed(name, density, longitudinal_pa, shear_pa=None):
        """Medium with frequency-independent moduli."""
        m = complex(longitudinal_pa)
        g = None if shear_pa is None else complex(shear_pa)
        return HomogeneousMedium(
            name, density, lambda f, _m=m: _m, None if g is None else (lambda f, _g=g: _g)
        )


def water():
    return HomogeneousMedium.fixed("water", WATER_DENSITY, WATER_DENSITY * WATER_SPEED**2)


def air():
    return HomogeneousMedium.fixed("air", AIR_DENSITY, AIR_DENSITY * AIR_SPEED**2)


def steel():
    return HomogeneousMedium.fixed(
        "steel",
        STEEL_DENSITY,
        longitudinal_from_youngs(STEEL_YOUNGS, STEEL_POISSON),
        shear_from_youngs(STEEL_YOUNGS, STEEL_POISSON),
    )


def medium_from_material(material):
    """Wrap a ViscoelasticMaterial as a HomogeneousMedium."""
    return HomogeneousMedium(
        material.name, material.density, material.longitudinal, material.shear
    )


def _modulus_of(medium, frequency_hz):
    m = np.asarray(medium.longitudinal_pa(frequency_hz), dtype=complex)
    if np.any(m.real <= 0.0):
        raise ValueError(f"medium {medium.name!r}: longitudinal modulus must have Re > 0")
    if np.any(m.imag < 0.0):
        raise ValueError(f"medium {medium.name!r}: longitudinal modulus must have Im >= 0")
    return m


def wave_parameters(density, longitudinal_pa, frequency_hz):
    """Complex wavenumber (Im k >= 0 branch) and impedance sqrt(rho*M)."""
    omega = 2.0 * np.pi * np.asarray(frequency_hz, dtype=float)
    m = np.asarray(longitudinal_pa, dtype=complex)
    k = omega * np.sqrt(density / m)
    k = np.where(k.imag < 0.0, -k, k)
    z = np.sqrt(density * m)
    return k, z


def layer_matrix(medium, thickness_m, frequency_hz):
    """Acoustic two-port of one homogeneous layer at a scalar frequency."""
    if frequency_hz <= 0.0:
        raise ValueError("frequency must be positive")
    if thickness_m < 0.0:
        raise ValueError("thickness must be non-negative")
    k, z = wave_parameters(medium.density, _modulus_of(medium, frequency_hz), frequency_hz)
    kd = complex(k * thickness_m)
    c, s = np.cos(kd), np.sin(kd)
    z = complex(z)
    return np.array([[c, 1j * z * s], [1j * s / z, c]], dtype=complex)


@dataclass(frozen=True)
class LayerStack:
    """Finite layers between a front and a back half-space."""

    layers: tuple
    front: HomogeneousMedium
    back: HomogeneousMedium

    def __post_init__(self):
        layers = tuple((m, float(d)) for m, d in self.layers)
        if any(d < 0.0 for _, d in layers):
            raise ValueError("layer thicknesses must be non-negative")
        object.__setattr__(self, "layers", layers)


@dataclass(frozen=True)
class AcousticResponse:
    """Power reflection/transmission/absorption spectra of one stack."""

    frequency_hz: np.ndarray
    reflection: np.ndarray
    transmission: np.ndarray
    absorption: np.ndarray

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.frequency_hz, dtype=float))
        r = np.atleast_1d(np.asarray(self.reflection, dtype=float))
        t = np.atleast_1d(np.asarray(self.transmission, dtype=float))
        a = np.atleast_1d(np.asarray(self.absorption, dtype=float))
        if not (f.shape == r.shape == t.shape == a.shape):
            raise ValueError("response arrays must share one shape")
        for name, arr in (("frequency_hz", f), ("reflection", r), ("transmission", t), ("absorption", a)):
            object.__setattr__(self, name, arr)


def _solve_chain(omega, layer_data, z_front, z_back):
    """Chain the layer two-ports and solve for (R, T, A) arrays.

    ``layer_data`` is a list of (density, complex modulus array, thickness m)
    tuples; moduli broadcast against omega. Half-space impedances should be
    real (lossless front/back media).
    """
    m11 = np.ones_like(omega, dtype=complex)
    m22 = np.ones_like(omega, dtype=complex)
    m12 = np.zeros_like(omega, dtype=complex)
    m21 = np.zeros_like(omega, dtype=complex)
    for rho, mod, d in layer_data:
        if d == 0.0:
            continue
        k = omega * np.sqrt(rho / np.asarray(mod, dtype=complex))
        k = np.where(k.imag < 0.0, -k, k)
        z = np.sqrt(rho * np.asarray(mod, dtype=complex))
        kd = k * d
        c, s = np.cos(kd), np.sin(kd)
        a12 = 1j * z * s
        a21 = 1j * s / z
        m11, m12, m21, m22 = (
            c * m11 + a12 * m21,
            c * m12 + a12 * m22,
            a21 * m11 + c * m21,
            a21 * m12 + c * m22,
        )
    u = m11 - z_back * m21
    w = (z_back * m22 - m12) / z_front
    denom = u + w
    refl = (w - u) / denom
    tau = 2.0 * (m11 * w + m12 * u / z_front) / denom
    big_r = np.abs(refl) ** 2
    big_t = np.abs(tau) ** 2 * np.real(z_front) / np.real(z_back)
    big_a = 1.0 - big_r - big_t
    big_a = np.where((big_a < 0.0) & (big_a > -1.0e-12), 0.0, big_a)
    return big_r, big_t, big_a


def stack_response(stack, frequency_hz):
    """Evaluate a stack over a frequency array; returns AcousticResponse."""
    f = np.atleast_1d(np.asarray(frequency_hz, dtype=float))
    if np.any(f <= 0.0):
        raise ValueError("frequencies must be positive")
    omega = 2.0 * np.pi * f
    layer_data = [
        (medium.density, _modulus_of(medium, f), d) for medium, d in stack.layers
    ]
    z_front = np.sqrt(stack.front.density * _modulus_of(stack.front, f))
    z_back = np.sqrt(stack.back.density * _modulus_of(stack.back, f))
    big_r, big_t, big_a = _solve_chain(omega, layer_data, z_front, z_back)
    return AcousticResponse(f, big_r, big_t, big_a)


def solve_stack(stack, frequency_hz):
    """Single-frequency (R, T, A) for a stack."""
    resp = stack_response(stack, [float(frequency_hz)])
    return float(resp.reflection[0]), float(resp.transmission[0]), float(resp.absorption[0])


# ---------------------------------------------------------------------------
# voided-layer homogenization


def area_fraction(void_radius_mm, n_voids, cell_height_mm):
    """Void area fraction of a layer strip of thickness 2r and height h."""
    return n_voids * np.pi * void_radius_mm / (2.0 * cell_height_mm)


def homogenize_void_layer(matrix_medium, void_radius_mm, n_voids, cell_height_mm):
    """Effective medium for a layer of cylindrical voids in a matrix.

    Density drops by the area fraction phi; the longitudinal modulus is
    M_eff(f) = M(f) * (1 - phi) / (1 + phi * L(f)) with the Lorentzian
    L = omega0^2 / (omega0^2 - omega^2 + i*gamma*omega). The +i*gamma*omega
    damping keeps Im{M_eff} >= 0 (passive) for any matrix, and the phi/2
    radiative floor in gamma keeps Re{M_eff} > 0 whenever the matrix's
    longitudinal and shear loss tangents agree (the constant-Poisson
    case). Raises InfeasibleGeometryError when phi >= 0.9, where the
    dilute-layer picture has broken down.
    """
    if matrix_medium.shear_pa is None:
        raise ValueError(f"medium {matrix_medium.name!r} has no shear modulus")
    phi = float(area_fraction(void_radius_mm, n_voids, cell_height_mm))
    if phi >= MAX_AREA_FRACTION:
        raise InfeasibleGeometryError(
            f"void area fraction {phi:.3f} >= {MAX_AREA_FRACTION} "
            f"(r = {void_radius_mm} mm, h = {cell_height_mm} mm)"
        )
    rho_m = matrix_medium.density
    r_m = void_radius_mm * MM_TO_M

    def effective_modulus(f, _medium=matrix_medium):
        omega = 2.0 * np.pi * np.asarray(f, dtype=float)
        m = np.asarray(_medium.longitudinal_pa(f), dtype=complex)
        g = np.asarray(_medium.shear_pa(f), dtype=complex)
        omega0_sq = MONOPOLE_STIFFNESS_COEFF * g.real / (rho_m * r_m**2)
        omega0 = np.sqrt(omega0_sq)
        gamma = omega0 * (g.imag / g.real + RADIATIVE_DAMPING_COEFF * phi)
        lorentz = omega0_sq / (omega0_sq - omega**2 + 1j * gamma * omega)
        return m * (1.0 - phi) / (1.0 + phi * lorentz)

    return HomogeneousMedium(
        name=f"{matrix_medium.name}+voids(r={void_radius_mm:g}mm)",
        density=(1.0 - phi) * rho_m,
        longitudinal_pa=effective_modulus,
    )


# ---------------------------------------------------------------------------
# unit-cell geometry


@dataclass(frozen=True)
class UnitCell:
    """Ten design variables of the four-void periodic cell, in mm.

    Layer 1 holds the voids at vertical centers B1 and B2 with radius r1
    and horizontal center depth D1; layer 2 holds B3 and B4 with radius
    r2 at depth D2. h is the cell height, t the coating thickness.
    """

    r1: float
    r2: float
    D1: float
    D2: float
    B1: float
    B2: float
    B3: float
    B4: float
    h: float
    t: float

    def __post_init__(self):
        for gene in GENE_ORDER:
            value = float(getattr(self, gene))
            lo, hi = CELL_BOUNDS[gene]
            if not lo <= value <= hi:
                raise ValueError(f"{gene} = {value:g} outside bounds [{lo:g}, {hi:g}]")
            object.__setattr__(self, gene, value)

    def as_array(self):
        return np.array([getattr(self, g) for g in GENE_ORDER], dtype=float)

    @classmethod
    def from_array(cls, genes):
        genes = np.asarray(genes, dtype=float)
        if genes.shape != (len(GENE_ORDER),):
            raise ValueError(f"expected {len(GENE_ORDER)} genes, got shape {genes.shape}")
        return cls(**{g: float(v) for g, v in zip(GENE_ORDER, genes)})


def sublayer_thicknesses_mm(cell):
    """The five 1D sublayer thicknesses: PU, voids 1, PU, voids 2, PU."""
    return (
        cell.D1 - cell.r1,
        2.0 * cell.r1,
        cell.D2 - cell.D1 - cell.r1 - cell.r2,
        2.0 * cell.r2,
        cell.t - cell.D2 - cell.r2,
    )


def clearance_margins(cell):
    """Signed margins (mm) of every feasibility constraint; >= 0 is satisfied.

    Edge-clearance margins are distance minus the 10 mm minimum; the
    layer-order margin is the PU spacer thickness between the void layers;
    the area-fraction margins are the mm of radius to spare below the 0.9
    homogenization validity cap.
    """
    c = EDGE_CLEARANCE_MM
    margins = {
        "front_1": cell.D1 - cell.r1 - c,
        "front_2": cell.D2 - cell.r2 - c,
        "back_1": cell.t - cell.D1 - cell.r1 - c,
        "back_2": cell.t - cell.D2 - cell.r2 - c,
        "layer_order": cell.D2 - cell.D1 - cell.r1 - cell.r2,
    }
    for label, b, r in (
        ("b1", cell.B1, cell.r1),
        ("b2", cell.B2, cell.r1),
        ("b3", cell.B3, cell.r2),
        ("b4", cell.B4, cell.r2),
    ):
        margins[f"bottom_{label}"] = b - r - c
        margins[f"top_{label}"] = cell.h - b - r - c
    for label, r in (("1", cell.r1), ("2", cell.r2)):
        margins[f"area_fraction_{label}"] = (
            MAX_AREA_FRACTION * cell.h / (np.pi * VOIDS_PER_LAYER / 2.0) - r
        )
    return margins


def violation_depth_mm(cell):
    """Total mm by which the cell violates its feasibility constraints."""
    return float(sum(max(0.0, -m) for m in clearance_margins(cell).values()))


def is_feasible(cell):
    return violation_depth_mm(cell) == 0.0


def cell_to_stack(cell, material, with_backing=True):
    """Map a cell to its 1D stack: PU and homogenized void layers (+ steel).

    Raises InfeasibleGeometryError when a derived sublayer thickness is
    negative or a void layer's area fraction reaches the homogenization cap.
    """
    d_front, d_void1, d_spacer, d_void2, d_back = sublayer_thicknesses_mm(cell)
    for name, d in (("front", d_front), ("spacer", d_spacer), ("back", d_back)):
        if d < 0.0:
            raise InfeasibleGeometryError(f"negative {name} sublayer: {d:g} mm")
    pu = medium_from_material(material)
    layers = [
        (pu, d_front * MM_TO_M),
        (homogenize_void_layer(pu, cell.r1, VOIDS_PER_LAYER, cell.h), d_void1 * MM_TO_M),
        (pu, d_spacer * MM_TO_M),
        (homogenize_void_layer(pu, cell.r2, VOIDS_PER_LAYER, cell.h), d_void2 * MM_TO_M),
        (pu, d_back * MM_TO_M),
    ]
    if with_backing:
        layers.append((steel(), STEEL_BACKING_MM * MM_TO_M))
        back = air()
    else:
        back = water()
    return LayerStack(layers=tuple(layers), front=water(), back=back)


def absorption_spectrum(cell, material, frequency_hz, with_backing=True):
    """R/T/A spectra of a cell with the given matrix material."""
    f = np.asarray(frequency_hz, dtype=float)
    if np.any(f <= 0.0) or np.any(np.diff(f) < 0.0):
        raise ValueError("frequencies must be positive and sorted ascending")
    return stack_response(cell_to_stack(cell, material, with_backing), f)


def first_peak_frequency(frequency_hz, absorption):
    """Frequency of the first interior local maximum of an absorption curve.

    The peak position is refined by a parabolic fit through the three
    surrounding samples in log10-frequency. Returns None when the curve
    has no interior local maximum.
    """
    f = np.asarray(frequency_hz, dtype=float)
    a = np.asarray(absorption, dtype=float)
    for i in range(1, len(a) - 1):
        if a[i] > a[i - 1] and a[i] >= a[i + 1]:
            x0, x1, x2 = np.log10(f[i - 1 : i + 2])
            y0, y1, y2 = a[i - 1 : i + 2]
            denom = (y0 - 2.0 * y1 + y2)
            if denom >= 0.0:
                return float(f[i])
            # vertex of the parabola through the three points (uniform or not)
            dx01, dx12 = x1 - x0, x2 - x1
            num = dx01**2 * (y1 - y2) - dx12**2 * (y1 - y0)
            den = dx01 * (y1 - y2) + dx12 * (y1 - y0)
            if den == 0.0:
                return float(f[i])
            return float(10.0 ** (x1 - 0.5 * num / den))
    return None


# ---------------------------------------------------------------------------
# file formats

SPECTRUM_HEADER = ["frequency_Hz", "R", "T", "A"]


def write_spectrum_csv(path, response):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SPECTRUM_HEADER)
        for f, r, t, a in zip(
            response.frequency_hz, response.reflection, response.transmission, response.absorption
        ):
            writer.writerow(["%.12g" % f, "%.12g" % r, "%.12g" % t, "%.12g" % a])


def read_spectrum_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SPECTRUM_HEADER:
            raise ValueError(f"unexpected spectrum header {header!r}")
        for row in reader:
            rows.append([float(v) for v in row])
    arr = np.array(rows, dtype=float)
    return AcousticResponse(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def dump_stack_json(path, cell, material, frequency_hz, with_backing=True):
    """Debug dump: per-layer density, complex modulus, and thickness at one frequency."""
    stack = cell_to_stack(cell, material, with_backing)
    entries = []
    for medium, d in stack.layers:
        m = complex(np.asarray(medium.longitudinal_pa(float(frequency_hz)), dtype=complex))
        entries.append(
            {
                "name": medium.name,
                "density": medium.density,
                "modulus_re": m.real,
                "modulus_im": m.imag,
                "thickness_m": d,
            }
        )
    with open(path, "w") as fh:
        json.dump({"frequency_hz": float(frequency_hz), "layers": entries}, fh, indent=2)
        fh.write("\n")
