"""Bundled materials: water, air, steel, and a reference polyurethane.

Fluid and steel properties are fixed constants. The polyurethane is
frequency dependent: its complex Young's modulus comes from a master
curve, with a constant Poisson ratio, and the longitudinal/shear moduli
are derived per standard isotropic elastodynamics.

Because no measured DMA tables ship with the package, a synthetic
fixture is provided: an S-shaped glass transition of log10(storage)
versus log10(reduced frequency) with a Gaussian loss-factor peak,
calibrated so the assembled master curve at 15 C gives a complex Young's
modulus of 8.8 + 2.3i MPa at 100 Hz (an 80-durometer polyurethane
anchor) and rises monotonically across the 10 Hz - 10 kHz band. Shift
factors of the fixture follow a WLF law with a small linear vertical
correction, spanning roughly ten decades of reduced frequency.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .rheology import (
    IsothermalSweep,
    MasterCurve,
    build_master_curve,
    eval_modulus,
    read_master_curve,
    write_master_curve,
)

WATER_DENSITY = 1000.0  # kg/m^3
WATER_SPEED = 1480.0  # m/s
AIR_DENSITY = 1.2
AIR_SPEED = 343.0
STEEL_DENSITY = 7850.0
STEEL_YOUNGS = 200.0e9  # Pa
STEEL_POISSON = 0.30
PU_DENSITY = 1026.0
PU_POISSON = 0.499


def longitudinal_from_youngs(youngs_pa, poisson):
    """Longitudinal (P-wave) modulus M = E (1-nu) / ((1+nu)(1-2nu))."""
    return youngs_pa * (1.0 - poisson) / ((1.0 + poisson) * (1.0 - 2.0 * poisson))


def shear_from_youngs(youngs_pa, poisson):
    """Shear modulus G = E / (2 (1+nu))."""
    return youngs_pa / (2.0 * (1.0 + poisson))


@dataclass(frozen=True)
class ViscoelasticMaterial:
    """Density, Poisson ratio, and a Young's-modulus master curve.

    When ``fixed_youngs_pa`` is set the master curve is bypassed and the
    modulus is that constant at every frequency (used to compare
    frequency-dependent against frozen-modulus responses).
    """

    name: str
    density: float
    poisson: float
    curve: MasterCurve
    fixed_youngs_pa: complex | None = None

    def __post_init__(self):
        if self.density <= 0.0:
            raise ValueError("density must be positive")
        if not 0.0 < self.poisson < 0.5:
            raise ValueError("poisson ratio must lie strictly between 0 and 0.5")

    def youngs(self, frequency_hz):
        if self.fixed_youngs_pa is not None:
            return self.fixed_youngs_pa
        return eval_modulus(self.curve, frequency_hz)

    def shear(self, frequency_hz):
        return shear_from_youngs(self.youngs(frequency_hz), self.poisson)

    def longitudinal(self, frequency_hz):
        return longitudinal_from_youngs(self.youngs(frequency_hz), self.poisson)

    def frozen(self, anchor_hz):
        """Same material with the modulus pinned to its value at anchor_hz."""
        return replace(self, fixed_youngs_pa=complex(self.youngs(anchor_hz)))


# ---------------------------------------------------------------------------
# synthetic DMA fixture
#
# log10 E'(x) = A0 + step * sigmoid((x - x0)/w)   x = log10(reduced Hz)
# tan_delta(x) = floor + (peak - floor) * exp(-((x - xp)/wp)^2)
# E''(x) = E'(x) * tan_delta(x)
#
# A0 and the tan-delta peak are solved so that E*(100 Hz) = 8.8 + 2.3i MPa.

_GLASS_STEP_DECADES = 2.5
_GLASS_CENTER = 6.0
_GLASS_WIDTH = 2.5
_TAN_DELTA_FLOOR = 0.06
_TAN_DELTA_CENTER = 6.0
_TAN_DELTA_WIDTH = 6.0

ANCHOR_FREQUENCY_HZ = 100.0
ANCHOR_STORAGE_PA = 8.8e6
ANCHOR_LOSS_PA = 2.3e6

_ANCHOR_X = math.log10(ANCHOR_FREQUENCY_HZ)
_A0 = math.log10(ANCHOR_STORAGE_PA) - _GLASS_STEP_DECADES / (
    1.0 + math.exp(-(_ANCHOR_X - _GLASS_CENTER) / _GLASS_WIDTH)
)
_TAN_DELTA_PEAK = _TAN_DELTA_FLOOR + (
    ANCHOR_LOSS_PA / ANCHOR_STORAGE_PA - _TAN_DELTA_FLOOR
) / math.exp(-(((_ANCHOR_X - _TAN_DELTA_CENTER) / _TAN_DELTA_WIDTH) ** 2))

# Shift-factor law used to spread the master curve across isothermal
# windows: WLF horizontal shifts plus a small linear vertical correction.
WLF_C1 = 6.0
WLF_C2 = 150.0
REFERENCE_TEMPERATURE_C = 15.0
_VERTICAL_SLOPE = 8.0e-4  # decades of modulus per degree below reference

REFERENCE_TEMPERATURES_C = tuple(range(-65, 36, 10))
REFERENCE_WINDOW_HZ = (0.1, 100.0)
REFERENCE_POINTS_PER_SWEEP = 25


def _master_storage_pa(x):
    return 10.0 ** (
        _A0 + _GLASS_STEP_DECADES / (1.0 + np.exp(-(x - _GLASS_CENTER) / _GLASS_WIDTH))
    )


def _tan_delta(x):
    return _TAN_DELTA_FLOOR + (_TAN_DELTA_PEAK - _TAN_DELTA_FLOOR) * np.exp(
        -(((x - _TAN_DELTA_CENTER) / _TAN_DELTA_WIDTH) ** 2)
    )


def wlf_log10_shift(temperature_c, reference_c=REFERENCE_TEMPERATURE_C, c1=WLF_C1, c2=WLF_C2):
    """WLF horizontal shift: log10 aT = -c1 (T - Tref) / (c2 + T - Tref)."""
    dt = temperature_c - reference_c
    return -c1 * dt / (c2 + dt)


def reference_dma_sweeps(
    temperatures_c=REFERENCE_TEMPERATURES_C,
    frequency_window_hz=REFERENCE_WINDOW_HZ,
    points_per_sweep=REFERENCE_POINTS_PER_SWEEP,
):
    """Synthetic isothermal sweeps consistent with the fixture laws above."""
    lo, hi = frequency_window_hz
    f = np.logspace(math.log10(lo), math.log10(hi), points_per_sweep)
    sweeps = []
    for t in temperatures_c:
        log_at = wlf_log10_shift(t)
        log_bt = _VERTICAL_SLOPE * (REFERENCE_TEMPERATURE_C - t)
        x = np.log10(f) + log_at
        storage = _master_storage_pa(x) / 10.0 ** log_bt
        sweeps.append(IsothermalSweep(float(t), f, storage, storage * _tan_delta(x)))
    return sweeps


@lru_cache(maxsize=1)
def _reference_fit():
    return build_master_curve(reference_dma_sweeps(), REFERENCE_TEMPERATURE_C)


def reference_polyurethane():
    """The bundled 80-durometer polyurethane as a ViscoelasticMaterial."""
    curve, _ = _reference_fit()
    return ViscoelasticMaterial("pu80", PU_DENSITY, PU_POISSON, curve)


def reference_shift_factors():
    """Shift factors recovered while assembling the bundled master curve."""
    _, shifts = _reference_fit()
    return shifts


# ---------------------------------------------------------------------------
# material constants file


def write_material_constants(path, material, shifts):
    """Write the constants JSON plus the referenced master-curve files.

    The master curve is stored next to the JSON as <name>_master.csv and
    <name>_master.json and referenced by relative path.
    """
    path = Path(path)
    csv_name = f"{material.name}_master.csv"
    sidecar_name = f"{material.name}_master.json"
    write_master_curve(material.curve, shifts, path.parent / csv_name, path.parent / sidecar_name)
    payload = {
        "water": {"density_kg_m3": WATER_DENSITY, "sound_speed_m_s": WATER_SPEED},
        "air": {"density_kg_m3": AIR_DENSITY, "sound_speed_m_s": AIR_SPEED},
        "steel": {
            "density_kg_m3": STEEL_DENSITY,
            "youngs_pa": STEEL_YOUNGS,
            "poisson": STEEL_POISSON,
        },
        "pu": {
            "name": material.name,
            "density_kg_m3": material.density,
            "poisson": material.poisson,
            "master_curve_csv": csv_name,
            "master_curve_sidecar": sidecar_name,
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_material_constants(path):
    """Read a constants JSON; returns (raw dict, ViscoelasticMaterial)."""
    path = Path(path)
    with open(path) as fh:
        payload = json.load(fh)
    pu = payload["pu"]
    curve, _ = read_master_curve(
        path.parent / pu["master_curve_csv"], path.parent / pu["master_curve_sidecar"]
    )
    material = ViscoelasticMaterial(
        name=pu.get("name", "pu"),
        density=float(pu["density_kg_m3"]),
        poisson=float(pu["poisson"]),
        curve=curve,
    )
    return payload, material
