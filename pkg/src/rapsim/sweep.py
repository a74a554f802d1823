"""Figure-level experiment orchestration.

Power scans for each excitation method, the 2-D chirp/area population
map, and robustness traces under slow modulation of the drive power.
Every grid point is an independent master-equation run; points are
farmed out to worker processes and reassembled in grid order, so results
are deterministic and independent of scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import SystemParams, final_excited_population
from .pulses import PulseSpec, synthesize


@dataclass(frozen=True, eq=False)
class ScanSpec:
    """Pulse template plus the area/chirp grids to sweep it over.

    ``areas_pi`` are transform-limited pulse areas in units of pi (the
    drive-strength axis: area scales as sqrt(power)); ``gdd_list_ps2``
    the chirps for map rows.  The template's own area/gdd are overridden
    point by point.
    """

    pulse: PulseSpec
    areas_pi: tuple
    gdd_list_ps2: tuple = ()
    system: SystemParams = None
    tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "areas_pi", tuple(float(a) for a in self.areas_pi))
        object.__setattr__(self, "gdd_list_ps2", tuple(float(g) for g in self.gdd_list_ps2))
        if not self.areas_pi:
            raise ValueError("areas_pi must be non-empty")
        if any(a < 0 for a in self.areas_pi):
            raise ValueError("pulse areas must be non-negative")
        if self.system is None:
            object.__setattr__(self, "system", SystemParams())


@dataclass(frozen=True)
class ModulationSpec:
    """Slow triangle modulation of the drive power.

    ``peak_to_peak_fraction`` is the power excursion relative to the mean
    (0.8 means power swings between 0.6x and 1.4x); the pulse area follows
    sqrt(power).  The modulation is quasi-static: every trace sample is an
    independent steady pulse run (50 mHz against ps dynamics).
    """

    frequency_hz: float
    peak_to_peak_fraction: float
    center_area_pi: float
    duration_s: float
    sampling_hz: float
    waveform: str = "triangle"

    def __post_init__(self):
        if self.waveform != "triangle":
            raise ValueError(f"unsupported modulation waveform {self.waveform!r}")
        if not self.frequency_hz > 0:
            raise ValueError("frequency_hz must be positive")
        if not 0 <= self.peak_to_peak_fraction < 2:
            raise ValueError("peak_to_peak_fraction must be in [0, 2)")
        if not (self.duration_s > 0 and self.sampling_hz > 0):
            raise ValueError("duration_s and sampling_hz must be positive")


def _point(task):
    pulse, system, tol = task
    return final_excited_population(synthesize(pulse), system, tol=tol)


def _run_points(tasks, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(int(workers), len(tasks)))
    if workers == 1:
        return [_point(t) for t in tasks]
    chunk = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_point, tasks, chunksize=chunk))


def power_scan(spec, workers=None, counts_per_population=None):
    """P_e(end) against pulse area at the template's chirp.

    Returns (areas_pi, p_e) arrays in grid order.  If a counts-per-
    population calibration is given the second column is scaled by it
    for overlay with measured count rates.
    """
    tasks = [(replace(spec.pulse, area_pi=a), spec.system, spec.tol) for a in spec.areas_pi]
    pe = np.array(_run_points(tasks, workers))
    if counts_per_population is not None:
        pe = pe * counts_per_population
    return np.array(spec.areas_pi), pe


def chirp_area_map(spec, workers=None):
    """P_e(end) over the full gdd x area grid.

    Returns (gdd_list, areas_pi, matrix) with rows indexed by gdd and
    columns by area.
    """
    if len(spec.gdd_list_ps2) < 2 or len(spec.areas_pi) < 2:
        raise ValueError("chirp_area_map needs at least 2 points on each axis")
    tasks = [
        (replace(spec.pulse, area_pi=a, gdd_ps2=g), spec.system, spec.tol)
        for g in spec.gdd_list_ps2
        for a in spec.areas_pi
    ]
    flat = np.array(_run_points(tasks, workers))
    matrix = flat.reshape(len(spec.gdd_list_ps2), len(spec.areas_pi))
    return np.array(spec.gdd_list_ps2), np.array(spec.areas_pi), matrix


def triangle_wave(phase):
    """Triangle wave of unit period and unit amplitude, 0 and rising at phase 0."""
    x = np.mod(np.asarray(phase, dtype=float), 1.0)
    return np.interp(x, [0.0, 0.25, 0.75, 1.0], [0.0, 1.0, -1.0, 0.0])


def robustness_trace(mod, pulse, system, workers=None, tol=1e-8):
    """P_e(end) over time while the drive power follows the modulation.

    Returns (t_s, area_pi, p_e, fluctuation) with fluctuation the
    (max - min)/(max + min) amplitude of the trace.
    """
    t = np.arange(0.0, mod.duration_s, 1.0 / mod.sampling_hz)
    power = 1.0 + 0.5 * mod.peak_to_peak_fraction * triangle_wave(mod.frequency_hz * t)
    areas = mod.center_area_pi * np.sqrt(power)
    tasks = [(replace(pulse, area_pi=a), system, tol) for a in areas]
    pe = np.array(_run_points(tasks, workers))
    fluctuation = float((pe.max() - pe.min()) / (pe.max() + pe.min()))
    return t, areas, pe, fluctuation


# ---------------------------------------------------------------------------
# CSV emission / ingestion
# ---------------------------------------------------------------------------

def write_curve_csv(areas_pi, p_e, path):
    np.savetxt(path, np.column_stack([areas_pi, p_e]), delimiter=",",
               header="area_pi,p_e", fmt="%.12g")


def write_map_csv(gdd_list, areas_pi, matrix, path):
    """Matrix CSV: header row of areas, first column of gdd."""
    with open(path, "w") as fh:
        fh.write("gdd_ps2\\area_pi," + ",".join(f"{a:.12g}" for a in areas_pi) + "\n")
        for g, row in zip(gdd_list, matrix):
            fh.write(f"{g:.12g}," + ",".join(f"{v:.12g}" for v in row) + "\n")


def read_map_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        areas = np.array([float(a) for a in header[1:]])
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    return body[:, 0], areas, body[:, 1:]


def write_trace_csv(t_s, area_pi, p_e, path, fluctuation=None):
    header = "t_s,area_pi,p_e"
    if fluctuation is not None:
        header = f"fluctuation = {fluctuation:.12g}\n" + header
    np.savetxt(path, np.column_stack([t_s, area_pi, p_e]), delimiter=",",
               header=header, fmt="%.12g")
