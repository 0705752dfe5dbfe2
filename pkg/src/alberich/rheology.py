"""Time-temperature superposition of DMA sweeps into modulus master curves.

Isothermal storage/loss modulus sweeps measured over a narrow frequency
window are merged into a single broadband master curve at a chosen
reference temperature. Each non-reference sweep is translated in
log10(frequency) (horizontal shift) and log10(modulus) (vertical shift)
until it lines up with the curve assembled so far; the alignment metric is
the summed point-to-polyline distance in log-log space. The finished
master curve is condensed into two fourth-order polynomials,
log10(modulus) vs log10(frequency), one for the storage and one for the
loss component, which downstream acoustic models evaluate per frequency.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

# Search box for the shifts, in decades. Horizontal shifts carry the full
# time-temperature equivalence; vertical shifts are small density/temperature
# corrections.
HORIZONTAL_SHIFT_BOUND = 12.0
VERTICAL_SHIFT_BOUND = 0.5

# Cost floor when two curves share no reduced-frequency overlap. A gap term
# is added on top so a simplex stranded outside the overlap region still
# sees a slope back toward it.
NO_OVERLAP_PENALTY = 1.0e6

POLY_DEGREE = 4

# Constant log10(loss) used when a curve carries no positive loss data;
# 10**-400 underflows to exactly 0.0 Pa at evaluation time.
_LOG10_ZERO_LOSS = -400.0


class MasterCurveError(ValueError):
    """Sweeps could not be merged into a single master curve."""


class ExtrapolationWarning(UserWarning):
    """Modulus evaluated outside the fitted reduced-frequency range."""


@dataclass(frozen=True)
class IsothermalSweep:
    """One DMA frequency sweep at a fixed temperature.

    Frequencies in Hz, strictly increasing; storage modulus > 0 Pa and
    loss modulus >= 0 Pa pointwise.
    """

    temperature_c: float
    frequency_hz: np.ndarray
    storage_pa: np.ndarray
    loss_pa: np.ndarray

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.frequency_hz, dtype=float))
        s = np.atleast_1d(np.asarray(self.storage_pa, dtype=float))
        g = np.atleast_1d(np.asarray(self.loss_pa, dtype=float))
        if not (f.shape == s.shape == g.shape) or f.ndim != 1 or f.size == 0:
            raise ValueError("sweep arrays must be equal-length, non-empty 1-D")
        if np.any(f <= 0.0) or np.any(np.diff(f) <= 0.0):
            raise ValueError("frequencies must be positive and strictly increasing")
        if np.any(s <= 0.0):
            raise ValueError("storage modulus must be positive everywhere")
        if np.any(g < 0.0):
            raise ValueError("loss modulus must be non-negative")
        object.__setattr__(self, "frequency_hz", f)
        object.__setattr__(self, "storage_pa", s)
        object.__setattr__(self, "loss_pa", g)

    def shifted(self, log10_horizontal, log10_vertical):
        """Sweep in reduced coordinates: f * aT, modulus * bT."""
        scale = 10.0 ** log10_vertical
        return IsothermalSweep(
            self.temperature_c,
            self.frequency_hz * 10.0 ** log10_horizontal,
            self.storage_pa * scale,
            self.loss_pa * scale,
        )


@dataclass(frozen=True)
class ShiftFactors:
    """Per-temperature log10 shifts used to assemble a master curve."""

    reference_temperature_c: float
    temperatures_c: tuple
    log10_horizontal: tuple
    log10_vertical: tuple

    def __post_init__(self):
        n = len(self.temperatures_c)
        if len(self.log10_horizontal) != n or len(self.log10_vertical) != n:
            raise ValueError("shift entries must align with temperatures")
        h, v = self.shifts_for(self.reference_temperature_c)
        if h != 0.0 or v != 0.0:
            raise ValueError("reference-temperature shifts must be exactly zero")

    def shifts_for(self, temperature_c):
        for t, h, v in zip(self.temperatures_c, self.log10_horizontal, self.log10_vertical):
            if t == temperature_c:
                return h, v
        raise KeyError(f"no shift entry for temperature {temperature_c} C")


@dataclass(frozen=True)
class MasterCurve:
    """Reduced-frequency modulus curve plus its fourth-order polynomial fits.

    Polynomial coefficients follow the numpy convention (highest power
    first) and act on log10(frequency), yielding log10(modulus).
    """

    reference_temperature_c: float
    log10_frequency: np.ndarray
    storage_pa: np.ndarray
    loss_pa: np.ndarray
    poly_storage: np.ndarray
    poly_loss: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.log10_frequency, dtype=float)
        if np.any(np.diff(x) < 0.0):
            raise ValueError("master-curve points must be sorted by log10 frequency")
        if len(self.poly_storage) != POLY_DEGREE + 1 or len(self.poly_loss) != POLY_DEGREE + 1:
            raise ValueError("polynomial fits must have exactly 5 coefficients")
        object.__setattr__(self, "log10_frequency", x)
        object.__setattr__(self, "storage_pa", np.asarray(self.storage_pa, dtype=float))
        object.__setattr__(self, "loss_pa", np.asarray(self.loss_pa, dtype=float))
        object.__setattr__(self, "poly_storage", np.asarray(self.poly_storage, dtype=float))
        object.__setattr__(self, "poly_loss", np.asarray(self.poly_loss, dtype=float))

    @property
    def log10_frequency_range(self):
        return float(self.log10_frequency[0]), float(self.log10_frequency[-1])

    def modulus(self, frequency_hz):
        return eval_modulus(self, frequency_hz)


@dataclass(frozen=True)
class ElasticConstants:
    """Frequency-dependent Young's/shear modulus pair with Poisson ratio.

    When no measured shear curve is supplied the shear modulus is derived
    from the Young's curve via G = E / (2 (1 + nu)).
    """

    youngs: MasterCurve
    poisson: float
    shear: MasterCurve | None = None

    def __post_init__(self):
        if not 0.0 < self.poisson < 0.5:
            raise ValueError("poisson ratio must lie strictly between 0 and 0.5")

    def youngs_modulus(self, frequency_hz):
        return eval_modulus(self.youngs, frequency_hz)

    def shear_modulus(self, frequency_hz):
        if self.shear is not None:
            return eval_modulus(self.shear, frequency_hz)
        return self.youngs_modulus(frequency_hz) / (2.0 * (1.0 + self.poisson))


# ---------------------------------------------------------------------------
# misalignment metric


def _points_to_polyline(px, py, qx, qy):
    """Sum of shortest Euclidean distances from points (px, py) to polyline q."""
    if len(px) == 0:
        return 0.0
    if len(qx) == 1:
        return float(np.sum(np.hypot(px - qx[0], py - qy[0])))
    ax, ay = qx[:-1], qy[:-1]
    dx, dy = qx[1:] - ax, qy[1:] - ay
    seg2 = dx * dx + dy * dy
    seg2 = np.where(seg2 > 0.0, seg2, 1.0)
    # project each point onto each segment, clamp to the segment ends
    t = ((px[:, None] - ax) * dx + (py[:, None] - ay) * dy) / seg2
    t = np.clip(t, 0.0, 1.0)
    ex = ax + t * dx - px[:, None]
    ey = ay + t * dy - py[:, None]
    return float(np.sum(np.sqrt(ex * ex + ey * ey).min(axis=1)))


def _channel_cost(ax, ay, bx, by):
    """Symmetric overlap-restricted distance between two log-log polylines."""
    lo = max(ax[0], bx[0])
    hi = min(ax[-1], bx[-1])
    if lo >= hi:
        return NO_OVERLAP_PENALTY * (1.0 + (lo - hi))
    sel_a = (ax >= lo) & (ax <= hi)
    sel_b = (bx >= lo) & (bx <= hi)
    return _points_to_polyline(ax[sel_a], ay[sel_a], bx, by) + _points_to_polyline(
        bx[sel_b], by[sel_b], ax, ay
    )


def _sweep_channels(sweep):
    """Log-log polylines of a sweep: storage always, loss where positive."""
    x = np.log10(sweep.frequency_hz)
    channels = [(x, np.log10(sweep.storage_pa))]
    keep = sweep.loss_pa > 0.0
    if np.count_nonzero(keep) >= 2:
        channels.append((x[keep], np.log10(sweep.loss_pa[keep])))
    return channels


def _pair_cost(channels_a, channels_b):
    total = 0.0
    for i in range(min(len(channels_a), len(channels_b))):
        ax, ay = channels_a[i]
        bx, by = channels_b[i]
        total += _channel_cost(ax, ay, bx, by)
    return total


def misalignment_cost(shifted_sweeps):
    """Total overlap distance between consecutive reduced-coordinate sweeps.

    Sweeps must already be shifted into reduced coordinates and ordered by
    temperature. For every consecutive pair the shortest distances from
    each overlap point of one curve to the piecewise-linear interpolant of
    the other are summed, in (log10 f, log10 modulus) space, for the
    storage and (where present) loss channels. Pairs with no overlap
    contribute a large penalty that grows with the gap.
    """
    sweeps = list(shifted_sweeps)
    temps = [s.temperature_c for s in sweeps]
    if temps != sorted(temps):
        raise ValueError("sweeps must be ordered by temperature")
    total = 0.0
    for a, b in zip(sweeps[:-1], sweeps[1:]):
        total += _pair_cost(_sweep_channels(a), _sweep_channels(b))
    return total


# ---------------------------------------------------------------------------
# master-curve assembly


def _group_by_temperature(sweeps):
    groups = {}
    for s in sweeps:
        groups.setdefault(s.temperature_c, []).append(s)
    return groups


def _group_channels(group, log_h, log_v):
    channels = []
    for s in group:
        channels.append(_sweep_channels(s.shifted(log_h, log_v)))
    # merge per-channel point clouds, sorted by x, so the group acts as one curve
    merged = []
    for i in range(max(len(c) for c in channels)):
        xs = np.concatenate([c[i][0] for c in channels if len(c) > i])
        ys = np.concatenate([c[i][1] for c in channels if len(c) > i])
        order = np.argsort(xs, kind="stable")
        merged.append((xs[order], ys[order]))
    return merged


def _merge_into(channels_master, channels_new):
    while len(channels_master) < len(channels_new):
        channels_master.append((np.empty(0), np.empty(0)))
    for i, (x, y) in enumerate(channels_new):
        mx, my = channels_master[i]
        ax = np.concatenate([mx, x])
        ay = np.concatenate([my, y])
        order = np.argsort(ax, kind="stable")
        channels_master[i] = (ax[order], ay[order])


def _align_group(master_channels, group, start_h, start_v):
    """Optimize one temperature group's shifts against the partial curve."""

    def cost(params):
        return _pair_cost(master_channels, _group_channels(group, params[0], params[1]))

    bounds = [
        (-HORIZONTAL_SHIFT_BOUND, HORIZONTAL_SHIFT_BOUND),
        (-VERTICAL_SHIFT_BOUND, VERTICAL_SHIFT_BOUND),
    ]
    best = None
    for dh in (0.0, 1.5, -1.5):
        h0 = float(np.clip(start_h + dh, *bounds[0]))
        res = minimize(
            cost,
            np.array([h0, start_v]),
            method="Nelder-Mead",
            bounds=bounds,
            options={"fatol": 1e-8, "xatol": 1e-6, "maxiter": 400},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best.fun >= NO_OVERLAP_PENALTY:
        raise MasterCurveError(
            "no overlap with partial master curve at %.1f C after optimization"
            % group[0].temperature_c
        )
    return float(best.x[0]), float(best.x[1])


def _fit_log_poly(x, y_pa):
    keep = y_pa > 0.0
    if np.count_nonzero(keep) < POLY_DEGREE + 1:
        coeffs = np.zeros(POLY_DEGREE + 1)
        coeffs[-1] = _LOG10_ZERO_LOSS
        return coeffs
    return np.polyfit(x[keep], np.log10(y_pa[keep]), POLY_DEGREE)


def build_master_curve(sweeps, reference_temperature_c):
    """Assemble a master curve and shift factors from isothermal sweeps.

    Sweeps at the reference temperature are pinned to zero shift. The
    remaining temperature groups are aligned one at a time, walking from
    the reference outward (rising temperatures first, then falling), each
    against the partial master curve assembled so far; every alignment is
    a Nelder-Mead search over (horizontal, vertical) shift restarted from
    three initial points. A single sweep degenerates to a plain polynomial
    fit at zero shift. Raises MasterCurveError when no sweeps are given,
    the reference temperature matches no sweep, or a group cannot be
    brought into overlap.
    """
    sweeps = list(sweeps)
    if not sweeps:
        raise MasterCurveError("need at least one sweep")
    groups = _group_by_temperature(sweeps)
    tref = float(reference_temperature_c)
    if tref not in groups:
        raise MasterCurveError(f"reference temperature {tref} C matches no sweep")

    temps = sorted(groups)
    above = [t for t in temps if t > tref]
    below = [t for t in temps if t < tref][::-1]

    shifts = {tref: (0.0, 0.0)}
    master_channels = []
    _merge_into(master_channels, _group_channels(groups[tref], 0.0, 0.0))

    for side in (above, below):
        prev_h, prev_v = 0.0, 0.0
        for t in side:
            h, v = _align_group(master_channels, groups[t], prev_h, prev_v)
            shifts[t] = (h, v)
            _merge_into(master_channels, _group_channels(groups[t], h, v))
            prev_h, prev_v = h, v

    # collect every shifted point (x, storage, loss) for the final curve
    xs, ss, ls = [], [], []
    for t in temps:
        h, v = shifts[t]
        for s in groups[t]:
            red = s.shifted(h, v)
            xs.append(np.log10(red.frequency_hz))
            ss.append(red.storage_pa)
            ls.append(red.loss_pa)
    x = np.concatenate(xs)
    storage = np.concatenate(ss)
    loss = np.concatenate(ls)
    order = np.argsort(x, kind="stable")
    x, storage, loss = x[order], storage[order], loss[order]

    curve = MasterCurve(
        reference_temperature_c=tref,
        log10_frequency=x,
        storage_pa=storage,
        loss_pa=loss,
        poly_storage=np.polyfit(x, np.log10(storage), POLY_DEGREE),
        poly_loss=_fit_log_poly(x, loss),
    )
    factors = ShiftFactors(
        reference_temperature_c=tref,
        temperatures_c=tuple(temps),
        log10_horizontal=tuple(shifts[t][0] for t in temps),
        log10_vertical=tuple(shifts[t][1] for t in temps),
    )
    return curve, factors


def eval_modulus(curve, frequency_hz):
    """Complex modulus storage + i*loss from the polynomial fits.

    Accepts a scalar or array frequency in Hz; evaluation outside the
    fitted range is allowed but emits an ExtrapolationWarning.
    """
    f = np.asarray(frequency_hz, dtype=float)
    if np.any(f <= 0.0):
        raise ValueError("frequency must be positive")
    x = np.log10(f)
    lo, hi = curve.log10_frequency_range
    if np.any(x < lo) or np.any(x > hi):
        warnings.warn(
            "modulus evaluated outside fitted range [%g, %g] log10 Hz" % (lo, hi),
            ExtrapolationWarning,
            stacklevel=2,
        )
    out = 10.0 ** np.polyval(curve.poly_storage, x) + 1j * 10.0 ** np.polyval(
        curve.poly_loss, x
    )
    return complex(out) if np.isscalar(frequency_hz) else out


def poisson_from_moduli(youngs_pa, shear_pa):
    """Poisson ratio from a measured Young's/shear modulus pair: E/(2G) - 1."""
    if youngs_pa <= 0.0 or shear_pa <= 0.0:
        raise ValueError("moduli must be positive")
    nu = youngs_pa / (2.0 * shear_pa) - 1.0
    if not -1.0 < nu <= 0.5:
        raise ValueError(
            f"inconsistent modulus pair: E/(2G) - 1 = {nu:.4f} outside (-1, 0.5]"
        )
    return nu


# ---------------------------------------------------------------------------
# file formats

DMA_HEADER = ["temperature_C", "frequency_Hz", "storage_Pa", "loss_Pa"]
MASTER_HEADER = ["log10_freq", "storage_Pa", "loss_Pa"]


def read_dma_csv(path):
    """Read grouped-by-temperature DMA rows into a list of sweeps."""
    sweeps = []
    current_t = None
    rows = []

    def flush():
        if rows:
            arr = np.array(rows, dtype=float)
            sweeps.append(IsothermalSweep(current_t, arr[:, 0], arr[:, 1], arr[:, 2]))

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != DMA_HEADER:
            raise ValueError(f"unexpected DMA header {header!r}")
        for row in reader:
            t = float(row[0])
            if current_t is None or t != current_t:
                flush()
                current_t, rows = t, []
            rows.append((float(row[1]), float(row[2]), float(row[3])))
        flush()
    return sweeps


def write_dma_csv(path, sweeps):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DMA_HEADER)
        for s in sweeps:
            for f, st, lo in zip(s.frequency_hz, s.storage_pa, s.loss_pa):
                writer.writerow(
                    ["%.12g" % s.temperature_c, "%.12g" % f, "%.12g" % st, "%.12g" % lo]
                )


def write_master_curve(curve, shifts, csv_path, sidecar_path):
    """Write curve points as CSV plus a JSON sidecar with fit metadata."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MASTER_HEADER)
        for x, s, lo in zip(curve.log10_frequency, curve.storage_pa, curve.loss_pa):
            writer.writerow(["%.12g" % x, "%.12g" % s, "%.12g" % lo])
    sidecar = {
        "reference_temperature_c": curve.reference_temperature_c,
        "shifts": [
            {
                "temperature_c": t,
                "log10_horizontal_shift": h,
                "log10_vertical_shift": v,
            }
            for t, h, v in zip(
                shifts.temperatures_c, shifts.log10_horizontal, shifts.log10_vertical
            )
        ],
        "poly_storage": [float(c) for c in curve.poly_storage],
        "poly_loss": [float(c) for c in curve.poly_loss],
    }
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_master_curve(csv_path, sidecar_path):
    rows = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != MASTER_HEADER:
            raise ValueError(f"unexpected master-curve header {header!r}")
        for row in reader:
            rows.append([float(v) for v in row])
    arr = np.array(rows, dtype=float)
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    curve = MasterCurve(
        reference_temperature_c=float(sidecar["reference_temperature_c"]),
        log10_frequency=arr[:, 0],
        storage_pa=arr[:, 1],
        loss_pa=arr[:, 2],
        poly_storage=np.array(sidecar["poly_storage"], dtype=float),
        poly_loss=np.array(sidecar["poly_loss"], dtype=float),
    )
    entries = sidecar["shifts"]
    factors = ShiftFactors(
        reference_temperature_c=curve.reference_temperature_c,
        temperatures_c=tuple(e["temperature_c"] for e in entries),
        log10_horizontal=tuple(e["log10_horizontal_shift"] for e in entries),
        log10_vertical=tuple(e["log10_vertical_shift"] for e in entries),
    )
    return curve, factors
