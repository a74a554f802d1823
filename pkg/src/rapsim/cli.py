"""Command-line entry point.

One subcommand per experiment; JSON configuration with strict schema;
seeded, reproducible CSV/JSON artifacts plus a manifest echoing the
resolved configuration.  Exit codes: 0 success, 1 configuration error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import dynamics, photonstats, pulses, spectra, sweep
from .config import ConfigError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common_flags(parser):
    parser.add_argument("--config", metavar="PATH", help="JSON run configuration")
    parser.add_argument("--out", metavar="DIR", default=".", help="output directory")
    parser.add_argument("--seed", type=int, metavar="U64", help="override the run seed")
    parser.add_argument("--format", choices=("csv", "json"), default=None,
                        help="bulk output format (default csv)")
    parser.add_argument("--threads", type=int, metavar="N", help="cap worker processes")
    parser.add_argument("--paper-defaults", action="store_true",
                        help="start from the bundled experiment constants")


def build_parser():
    parser = _Parser(prog="rapsim", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, text in [
        ("rabi", "power scan with transform-limited pulses (gdd = 0)"),
        ("rap", "power scan with the configured chirp"),
        ("map", "excited population over the chirp x area grid"),
        ("trace", "robustness trace under slow power modulation"),
        ("dressed", "dressed-state energies along the configured pulse"),
        ("gdd", "grating-pair dispersion calculator"),
        ("hbt", "Monte Carlo intensity-correlation histogram plus g2"),
        ("hom", "Monte Carlo two-photon interference and visibility"),
        ("g2", "estimate g2(0) from a histogram file"),
        ("spectrum", "synthesise and/or fit a fluorescence spectrum"),
    ]:
        p = sub.add_parser(name, help=text)
        _common_flags(p)
        if name == "g2":
            p.add_argument("input", nargs="?", default=None,
                           help="histogram CSV (overrides config.g2.input)")
        if name == "spectrum":
            p.add_argument("input", nargs="?", default=None,
                           help="spectrum CSV to fit (overrides config.spectrum.fit_input)")
    return parser


def _write_table(path_base, fmt, columns, arrays, meta=None):
    """Tabular artifact in the requested format; returns the file written."""
    data = np.column_stack(arrays)
    if fmt == "json":
        path = path_base.with_suffix(".json")
        payload = {"columns": list(columns), "rows": [list(map(float, row)) for row in data]}
        if meta:
            payload.update(meta)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        path = path_base.with_suffix(".csv")
        header = ",".join(columns)
        if meta:
            header = "\n".join(f"{k} = {v}" for k, v in sorted(meta.items())) + "\n" + header
        np.savetxt(path, data, delimiter=",", header=header, fmt="%.12g")
    return path


def read_table_json(path):
    payload = json.loads(Path(path).read_text())
    return payload["columns"], np.array(payload["rows"], dtype=float)


def _write_json(path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _scan_tolerance(cfg):
    return cfg.get("scan", {}).get("tol", 1e-8)


def _run_rabi(cfg, out, fmt, seed, threads):
    scan = cfgmod.build_scan(cfg)
    scan = replace(scan, pulse=replace(scan.pulse, gdd_ps2=0.0))
    areas, pe = sweep.power_scan(scan, workers=threads)
    return [_write_table(out / "rabi_scan", fmt, ("area_pi", "p_e"), (areas, pe))]


def _run_rap(cfg, out, fmt, seed, threads):
    scan = cfgmod.build_scan(cfg)
    areas, pe = sweep.power_scan(scan, workers=threads)
    meta = {"gdd_ps2": scan.pulse.gdd_ps2}
    return [_write_table(out / "rap_scan", fmt, ("area_pi", "p_e"), (areas, pe), meta)]


def _run_map(cfg, out, fmt, seed, threads):
    scan = cfgmod.build_scan(cfg)
    if len(scan.gdd_list_ps2) < 2:
        raise ConfigError("config.scan.gdd_list_ps2: need at least 2 chirp values for map")
    gdd, areas, matrix = sweep.chirp_area_map(scan, workers=threads)
    if fmt == "json":
        path = out / "chirp_area_map.json"
        _write_json(path, {
            "gdd_ps2": list(map(float, gdd)),
            "areas_pi": list(map(float, areas)),
            "p_e": [list(map(float, row)) for row in matrix],
        })
    else:
        path = out / "chirp_area_map.csv"
        sweep.write_map_csv(gdd, areas, matrix, path)
    return [path]


def _run_trace(cfg, out, fmt, seed, threads):
    mod = cfgmod.build_modulation(cfg)
    pulse = cfgmod.build_pulse(cfg)
    system = cfgmod.build_system(cfg)
    t, areas, pe, fluct = sweep.robustness_trace(mod, pulse, system, workers=threads,
                                                 tol=_scan_tolerance(cfg))
    paths = [_write_table(out / "trace", fmt, ("t_s", "area_pi", "p_e"),
                          (t, areas, pe), {"fluctuation": fluct})]
    paths.append(_write_json(out / "trace_summary.json", {
        "fluctuation": fluct,
        "center_area_pi": mod.center_area_pi,
        "peak_to_peak_fraction": mod.peak_to_peak_fraction,
    }))
    return paths


def _run_dressed(cfg, out, fmt, seed, threads):
    pulse = cfgmod.build_pulse(cfg)
    field = pulses.synthesize(pulse)
    omega = np.abs(field.envelope)
    delta = pulses.instantaneous_detuning(field)
    frame = dynamics.dressed_frame(omega, delta)
    return [_write_table(
        out / "dressed", fmt,
        ("t_ps", "omega_radps", "delta_radps", "e_plus_radps", "e_minus_radps",
         "splitting_radps", "mixing_angle_rad"),
        (field.times(), omega, delta, frame.e_plus, frame.e_minus,
         frame.splitting, frame.mixing_angle),
    )]


def _run_gdd(cfg, out, fmt, seed, threads):
    geom = cfgmod.build_stretcher(cfg)
    value = pulses.treacy_gdd(geom)
    payload = {
        "gdd_ps2": value,
        "groove_density_per_mm": geom.groove_density_per_mm,
        "wavelength_nm": geom.wavelength_nm,
        "incidence_deg": geom.incidence_deg,
        "effective_separation_mm": geom.effective_separation_mm,
        "telescope_inserted": geom.telescope_inserted,
    }
    if "pulse" in cfg:
        spec = cfgmod.build_pulse(cfg)
        payload["stretched_fwhm_estimate_ps"] = spec.stretched_fwhm_ps(value)
    return [_write_json(out / "gdd.json", payload)]


def _run_hbt(cfg, out, fmt, seed, threads):
    src = cfgmod.build_source(cfg)
    sec = cfg.get("hbt", {})
    hist = photonstats.simulate_hbt(
        src, sec.get("n_pulses", 2_000_000), seed,
        bin_width_ns=sec.get("bin_width_ns", 0.1),
        n_periods=sec.get("n_periods", 7),
    )
    g2sec = cfg.get("g2", {})
    res = photonstats.estimate_g2(
        hist, window_ns=g2sec.get("window_ns", 3.2), n_side=g2sec.get("n_side", 6))
    paths = []
    if fmt == "json":
        paths.append(_write_table(out / "hbt_histogram", fmt,
                                  ("delay_ns", "counts"), (hist.delays_ns, hist.counts),
                                  {"bin_width_ns": hist.bin_width_ns,
                                   "rep_period_ns": hist.rep_period_ns}))
    else:
        path = out / "hbt_histogram.csv"
        photonstats.write_histogram_csv(hist, path)
        paths.append(path)
    paths.append(_write_json(out / "hbt_g2.json", {
        "g2": res.g2, "sigma": res.sigma,
        "window_ns": res.window_ns, "n_side_peaks": res.n_side_peaks,
        "analytic_g2": src.analytic_g2(),
    }))
    return paths


def _run_hom(cfg, out, fmt, seed, threads):
    src = cfgmod.build_source(cfg)
    sec = cfg.get("hom", {})
    xi = cfg.get("source", {}).get("mz_visibility", 1.0)
    n_pulses = sec.get("n_pulses", 2_000_000)
    kwargs = dict(mz_visibility=xi, mz_delay_ns=sec.get("mz_delay_ns", 4.0),
                  bin_width_ns=sec.get("bin_width_ns", 0.1))
    h_par = photonstats.simulate_hom(src, "parallel", n_pulses, seed, **kwargs)
    h_cross = photonstats.simulate_hom(src, "cross", n_pulses, seed + 1, **kwargs)
    result = photonstats.analyze_hom(h_par, h_cross, src.analytic_g2(), xi,
                                     window_ns=sec.get("window_ns", 3.2))
    paths = []
    for tag, hist in (("parallel", h_par), ("cross", h_cross)):
        if fmt == "json":
            paths.append(_write_table(out / f"hom_{tag}", fmt, ("delay_ns", "counts"),
                                      (hist.delays_ns, hist.counts),
                                      {"bin_width_ns": hist.bin_width_ns,
                                       "rep_period_ns": hist.rep_period_ns}))
        else:
            path = out / f"hom_{tag}.csv"
            photonstats.write_histogram_csv(hist, path)
            paths.append(path)
    paths.append(_write_json(out / "hom_result.json", {
        "v_raw": result.v_raw, "v_raw_sigma": result.v_raw_sigma,
        "v_corrected": result.v_corrected, "v_corrected_sigma": result.v_corrected_sigma,
        "window_ns": result.window_ns, "g2": result.g2,
        "mz_visibility": result.mz_visibility,
        "cz_process_fidelity": photonstats.cz_process_fidelity(min(max(result.v_corrected, 0.0), 1.0)),
    }))
    return paths


def _run_g2(cfg, out, fmt, seed, threads, cli_input=None):
    sec = cfg.get("g2", {})
    source = cli_input or sec.get("input")
    if not source:
        raise ConfigError("config.g2.input: missing required key (histogram CSV path)")
    try:
        hist = photonstats.read_histogram_csv(source)
    except OSError as exc:
        raise ConfigError(f"config.g2.input: cannot read {source}: {exc}") from exc
    res = photonstats.estimate_g2(hist, window_ns=sec.get("window_ns", 3.2),
                                  n_side=sec.get("n_side", 6))
    return [_write_json(out / "g2_result.json", {
        "g2": res.g2, "sigma": res.sigma, "window_ns": res.window_ns,
        "n_side_peaks": res.n_side_peaks, "input": str(source),
    })]


def _run_spectrum(cfg, out, fmt, seed, threads, cli_input=None):
    sec = cfg.get("spectrum", {})
    paths = []
    fit_input = cli_input or sec.get("fit_input")
    if fit_input:
        spec = spectra.read_spectrum_csv(fit_input)
    else:
        spec = spectra.synth_spectrum(
            center=sec.get("center_ghz", 0.0),
            lorentzian_fwhm=sec.get("lorentzian_fwhm_ghz", 0.48),
            gaussian_fwhm=sec.get("gaussian_fwhm_ghz", 0.55),
            amplitude=sec.get("amplitude", 1.0),
            baseline=sec.get("baseline", 0.0),
            n_points=sec.get("n_points", 200),
            noise=sec.get("noise", 0.0),
            seed=seed,
            span_fwhm=sec.get("span_fwhm", 8.0),
        )
        if fmt == "json":
            arrays = [spec.freq_ghz, spec.intensity]
            cols = ["freq_ghz", "intensity"]
            if spec.sigma is not None:
                arrays.append(spec.sigma)
                cols.append("sigma")
            paths.append(_write_table(out / "spectrum", fmt, cols, arrays))
        else:
            path = out / "spectrum.csv"
            spectra.write_spectrum_csv(spec, path)
            paths.append(path)
    fit = spectra.fit_voigt(spec)
    paths.append(_write_json(out / "voigt_fit.json", spectra.fit_to_dict(fit)))
    return paths


_HANDLERS = {
    "rabi": _run_rabi,
    "rap": _run_rap,
    "map": _run_map,
    "trace": _run_trace,
    "dressed": _run_dressed,
    "gdd": _run_gdd,
    "hbt": _run_hbt,
    "hom": _run_hom,
    "g2": _run_g2,
    "spectrum": _run_spectrum,
}


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = cfgmod.load_config(args.config, paper_defaults=args.paper_defaults)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        cfg["seed"] = args.seed
    seed = cfg.get("seed", cfgmod.DEFAULT_SEED)
    fmt = args.format or cfg.get("format", "csv")
    threads = args.threads if args.threads is not None else cfg.get("threads")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    handler = _HANDLERS[args.subcommand]
    extra = {}
    if args.subcommand in ("g2", "spectrum"):
        extra["cli_input"] = args.input
    artifacts = handler(cfg, out, fmt, seed, threads, **extra)
    manifest = {
        "subcommand": args.subcommand,
        "seed": seed,
        "format": fmt,
        "threads": threads,
        "config": cfg,
        "artifacts": sorted(p.name for p in artifacts),
        "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    _write_json(out / "manifest.json", manifest)
    return 0


def main(argv=None):
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, np.linalg.LinAlgError,
            dynamics.IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
