"""JSON run configuration: strict validation, bundled defaults, builders.

The configuration is a plain JSON object with one section per subsystem.
Unknown keys are rejected with the offending dotted path; sections are
optional until a subcommand needs them, at which point missing keys are
reported by name.  ``PAPER_DEFAULTS`` bundles the constants of the
experiment this package models (4.2 K bath, 0.022 ps^2 / 2 rad/ps phonon
coupling, 3 ps sech pulses chirped by 32 ps^2, 82 MHz repetition,
0.39 GHz lifetime-limited linewidth, 3.2 ns analysis windows).
"""

from __future__ import annotations

import copy
import json
import math

from .dynamics import PhononParams, SystemParams, radiative_rate_from_linewidth_ghz
from .photonstats import SourceModel
from .pulses import PulseSpec, StretcherGeometry
from .sweep import ModulationSpec, ScanSpec

DEFAULT_SEED = 1729


class ConfigError(ValueError):
    """Invalid or missing configuration; message names the dotted key path."""


_NUMBER = "number"
_INTEGER = "integer"
_STRING = "string"
_BOOLEAN = "boolean"
_NUMBER_ARRAY = "number array"
_NULLABLE_STRING = "string or null"

_SCHEMA = {
    "seed": _INTEGER,
    "threads": _INTEGER,
    "format": _STRING,
    "pulse": {
        "shape": _STRING,
        "fwhm_ps": _NUMBER,
        "area_pi": _NUMBER,
        "gdd_ps2": _NUMBER,
        "detuning_radps": _NUMBER,
    },
    "stretcher": {
        "groove_density_per_mm": _NUMBER,
        "wavelength_nm": _NUMBER,
        "incidence_deg": _NUMBER,
        "effective_separation_mm": _NUMBER,
        "telescope_inserted": _BOOLEAN,
    },
    "system": {
        "radiative_rate_per_ps": _NUMBER,
        "pure_dephasing_per_ps": _NUMBER,
        "phonon": {
            "alpha_ps2": _NUMBER,
            "cutoff_radps": _NUMBER,
            "temperature_k": _NUMBER,
        },
    },
    "scan": {
        "areas_pi": _NUMBER_ARRAY,
        "gdd_list_ps2": _NUMBER_ARRAY,
        "tol": _NUMBER,
    },
    "modulation": {
        "waveform": _STRING,
        "frequency_hz": _NUMBER,
        "peak_to_peak_fraction": _NUMBER,
        "center_area_pi": _NUMBER,
        "duration_s": _NUMBER,
        "sampling_hz": _NUMBER,
    },
    "source": {
        "p0": _NUMBER,
        "p1": _NUMBER,
        "p2": _NUMBER,
        "overlap": _NUMBER,
        "efficiency": _NUMBER,
        "rep_period_ns": _NUMBER,
        "lifetime_ns": _NUMBER,
        "mz_visibility": _NUMBER,
    },
    "hbt": {
        "n_pulses": _INTEGER,
        "bin_width_ns": _NUMBER,
        "n_periods": _INTEGER,
    },
    "hom": {
        "n_pulses": _INTEGER,
        "bin_width_ns": _NUMBER,
        "window_ns": _NUMBER,
        "mz_delay_ns": _NUMBER,
    },
    "g2": {
        "input": _NULLABLE_STRING,
        "window_ns": _NUMBER,
        "n_side": _INTEGER,
    },
    "spectrum": {
        "center_ghz": _NUMBER,
        "lorentzian_fwhm_ghz": _NUMBER,
        "gaussian_fwhm_ghz": _NUMBER,
        "amplitude": _NUMBER,
        "baseline": _NUMBER,
        "n_points": _INTEGER,
        "noise": _NUMBER,
        "span_fwhm": _NUMBER,
        "fit_input": _NULLABLE_STRING,
    },
}


def _check_leaf(value, kind, path):
    ok = {
        _NUMBER: lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        _INTEGER: lambda v: isinstance(v, int) and not isinstance(v, bool),
        _STRING: lambda v: isinstance(v, str),
        _BOOLEAN: lambda v: isinstance(v, bool),
        _NUMBER_ARRAY: lambda v: isinstance(v, list)
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v),
        _NULLABLE_STRING: lambda v: v is None or isinstance(v, str),
    }[kind]
    if not ok(value):
        raise ConfigError(f"{path}: expected {kind}, got {value!r}")


def validate(cfg, schema=None, path="config"):
    """Reject unknown keys and wrong types anywhere in the tree."""
    schema = _SCHEMA if schema is None else schema
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected an object")
    for key, value in cfg.items():
        if key not in schema:
            raise ConfigError(f"{path}.{key}: unknown key")
        spec = schema[key]
        if isinstance(spec, dict):
            validate(value, spec, f"{path}.{key}")
        else:
            _check_leaf(value, spec, f"{path}.{key}")


def merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _section(cfg, name):
    if name not in cfg:
        raise ConfigError(f"config.{name}: section required for this subcommand")
    return cfg[name]


def _require(section, name, *keys):
    missing = [k for k in keys if k not in section]
    if missing:
        raise ConfigError(f"config.{name}.{missing[0]}: missing required key")


def build_pulse(cfg):
    sec = _section(cfg, "pulse")
    _require(sec, "pulse", "shape", "fwhm_ps", "area_pi")
    try:
        return PulseSpec(
            shape=sec["shape"],
            fwhm_ps=sec["fwhm_ps"],
            area_pi=sec["area_pi"],
            gdd_ps2=sec.get("gdd_ps2", 0.0),
            detuning_radps=sec.get("detuning_radps", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"config.pulse: {exc}") from exc


def build_stretcher(cfg):
    sec = _section(cfg, "stretcher")
    _require(sec, "stretcher", "groove_density_per_mm", "wavelength_nm",
             "incidence_deg", "effective_separation_mm")
    try:
        return StretcherGeometry(
            groove_density_per_mm=sec["groove_density_per_mm"],
            wavelength_nm=sec["wavelength_nm"],
            incidence_deg=sec["incidence_deg"],
            effective_separation_mm=sec["effective_separation_mm"],
            telescope_inserted=sec.get("telescope_inserted", False),
        )
    except ValueError as exc:
        raise ConfigError(f"config.stretcher: {exc}") from exc


def build_system(cfg):
    sec = cfg.get("system", {})
    ph = sec.get("phonon", {})
    try:
        return SystemParams(
            radiative_rate=sec.get("radiative_rate_per_ps", 0.0),
            pure_dephasing=sec.get("pure_dephasing_per_ps", 0.0),
            phonon=PhononParams(
                alpha_ps2=ph.get("alpha_ps2", 0.0),
                cutoff_radps=ph.get("cutoff_radps", 2.0),
                temperature_k=ph.get("temperature_k", 0.0),
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"config.system: {exc}") from exc


def build_scan(cfg):
    sec = _section(cfg, "scan")
    _require(sec, "scan", "areas_pi")
    try:
        return ScanSpec(
            pulse=build_pulse(cfg),
            areas_pi=tuple(sec["areas_pi"]),
            gdd_list_ps2=tuple(sec.get("gdd_list_ps2", ())),
            system=build_system(cfg),
            tol=sec.get("tol", 1e-8),
        )
    except ValueError as exc:
        raise ConfigError(f"config.scan: {exc}") from exc


def build_modulation(cfg):
    sec = _section(cfg, "modulation")
    _require(sec, "modulation", "frequency_hz", "peak_to_peak_fraction",
             "center_area_pi", "duration_s", "sampling_hz")
    try:
        return ModulationSpec(
            frequency_hz=sec["frequency_hz"],
            peak_to_peak_fraction=sec["peak_to_peak_fraction"],
            center_area_pi=sec["center_area_pi"],
            duration_s=sec["duration_s"],
            sampling_hz=sec["sampling_hz"],
            waveform=sec.get("waveform", "triangle"),
        )
    except ValueError as exc:
        raise ConfigError(f"config.modulation: {exc}") from exc


def build_source(cfg):
    sec = _section(cfg, "source")
    _require(sec, "source", "p0", "p1", "p2")
    try:
        return SourceModel(
            p0=sec["p0"],
            p1=sec["p1"],
            p2=sec["p2"],
            overlap=sec.get("overlap", 1.0),
            efficiency=sec.get("efficiency", 1.0),
            rep_period_ns=sec.get("rep_period_ns", 1e3 / 82.0),
            lifetime_ns=sec.get("lifetime_ns", 0.408),
        )
    except ValueError as exc:
        raise ConfigError(f"config.source: {exc}") from exc


def load_config(path=None, paper_defaults=False):
    cfg = copy.deepcopy(PAPER_DEFAULTS) if paper_defaults else {}
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from exc
        validate(user)
        cfg = merge(cfg, user)
    validate(cfg)
    return cfg


def _solve_p2(p1, g2_target):
    """p2 making the analytic pulsed g2 = 2 p2/(p1 + 2 p2)^2 hit the target."""
    if g2_target == 0:
        return 0.0
    # with s = p1 + 2 p2: g s^2 - s + p1 = 0, branch continuous at g -> 0
    s = (1.0 - math.sqrt(1.0 - 4.0 * g2_target * p1)) / (2.0 * g2_target)
    return 0.5 * (s - p1)


_GAMMA_PER_PS = radiative_rate_from_linewidth_ghz(0.39)
_P1_DEFAULT = 0.5
_P2_DEFAULT = _solve_p2(_P1_DEFAULT, 0.003)

PAPER_DEFAULTS = {
    "seed": DEFAULT_SEED,
    "pulse": {
        "shape": "sech",
        "fwhm_ps": 3.0,
        "area_pi": 1.0,
        "gdd_ps2": 32.0,
        "detuning_radps": 0.0,
    },
    "stretcher": {
        "groove_density_per_mm": 1200.0,
        "wavelength_nm": 940.0,
        "incidence_deg": 34.33,
        "effective_separation_mm": 8507.7,
        "telescope_inserted": True,
    },
    "system": {
        "radiative_rate_per_ps": _GAMMA_PER_PS,
        "pure_dephasing_per_ps": 0.0,
        "phonon": {"alpha_ps2": 0.022, "cutoff_radps": 2.0, "temperature_k": 4.2},
    },
    "scan": {
        "areas_pi": [round(0.05 * k, 10) for k in range(1, 61)],
        "gdd_list_ps2": [-48.0, -32.0, -16.0, -8.0, 8.0, 16.0, 32.0, 48.0],
        "tol": 1e-8,
    },
    "modulation": {
        "waveform": "triangle",
        "frequency_hz": 0.05,
        "peak_to_peak_fraction": 0.8,
        "center_area_pi": 1.9,
        "duration_s": 40.0,
        "sampling_hz": 2.0,
    },
    "source": {
        "p0": 1.0 - _P1_DEFAULT - _P2_DEFAULT,
        "p1": _P1_DEFAULT,
        "p2": _P2_DEFAULT,
        "overlap": 0.995,
        "efficiency": 0.3,
        "rep_period_ns": 1e3 / 82.0,
        "lifetime_ns": 1e-3 / _GAMMA_PER_PS,
        "mz_visibility": 0.995,
    },
    "hbt": {"n_pulses": 2_000_000, "bin_width_ns": 0.1, "n_periods": 7},
    "hom": {"n_pulses": 2_000_000, "bin_width_ns": 0.1, "window_ns": 3.2, "mz_delay_ns": 4.0},
    "g2": {"input": None, "window_ns": 3.2, "n_side": 6},
    "spectrum": {
        "center_ghz": 0.0,
        "lorentzian_fwhm_ghz": 0.48,
        "gaussian_fwhm_ghz": 0.55,
        "amplitude": 1.0,
        "baseline": 0.0,
        "n_points": 200,
        "noise": 0.02,
        "span_fwhm": 8.0,
        "fit_input": None,
    },
}
