"""Voigt modelling of high-resolution fluorescence spectra.

Forward model and weighted nonlinear least-squares fit separating the
homogeneous (Lorentzian) and inhomogeneous (Gaussian) linewidths of a
measured lineshape.  Frequencies and FWHM widths are in GHz of ordinary
frequency; conversion to angular rad/ps happens only at the dynamics
boundary (2*pi*1e-3 per GHz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import wofz

# Gaussian lineshape FWHM = 2*sqrt(2 ln 2) * sigma
_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True, eq=False)
class Spectrum:
    freq_ghz: np.ndarray
    intensity: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.freq_ghz, dtype=float)
        y = np.asarray(self.intensity, dtype=float)
        object.__setattr__(self, "freq_ghz", f)
        object.__setattr__(self, "intensity", y)
        if f.ndim != 1 or f.shape != y.shape:
            raise ValueError("freq_ghz and intensity must be 1-d arrays of equal length")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if np.any(y < 0):
            raise ValueError("intensities must be non-negative")
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != f.shape or np.any(s <= 0):
                raise ValueError("sigma must match the grid and be positive")
            object.__setattr__(self, "sigma", s)


@dataclass(frozen=True)
class VoigtFit:
    center_ghz: float
    lorentzian_fwhm_ghz: float
    gaussian_fwhm_ghz: float
    amplitude: float
    baseline: float
    center_sigma: float
    lorentzian_sigma: float
    gaussian_sigma: float
    amplitude_sigma: float
    baseline_sigma: float
    reduced_chi2: float
    converged: bool
    n_iter: int


def voigt_profile(freq_ghz, center, lorentzian_fwhm, gaussian_fwhm, amplitude=1.0,
                  baseline=0.0):
    """Area-normalised Voigt profile times ``amplitude`` plus ``baseline``.

    Convolution of a Lorentzian of FWHM ``lorentzian_fwhm`` with a Gaussian
    of FWHM ``gaussian_fwhm``, evaluated through the Faddeeva function;
    the degenerate limits reduce to the pure lineshapes.
    """
    if lorentzian_fwhm < 0 or gaussian_fwhm < 0:
        raise ValueError("linewidths must be non-negative")
    scale = lorentzian_fwhm + gaussian_fwhm
    if scale == 0:
        raise ValueError("at least one linewidth must be positive")
    x = np.asarray(freq_ghz, dtype=float) - center
    gamma = 0.5 * lorentzian_fwhm
    if gaussian_fwhm <= 1e-12 * scale:
        core = (gamma / math.pi) / (x**2 + gamma**2)
    elif lorentzian_fwhm <= 1e-12 * scale:
        sg = gaussian_fwhm / _FWHM_PER_SIGMA
        core = np.exp(-0.5 * (x / sg) ** 2) / (sg * math.sqrt(2.0 * math.pi))
    else:
        sg = gaussian_fwhm / _FWHM_PER_SIGMA
        z = (x + 1j * gamma) / (sg * math.sqrt(2.0))
        core = wofz(z).real / (sg * math.sqrt(2.0 * math.pi))
    return amplitude * core + baseline


def voigt_fwhm(lorentzian_fwhm, gaussian_fwhm):
    """Olivero-Longbothum approximation of the total Voigt FWHM (0.02%)."""
    return 0.5346 * lorentzian_fwhm + math.sqrt(
        0.2166 * lorentzian_fwhm**2 + gaussian_fwhm**2
    )


def synth_spectrum(center, lorentzian_fwhm, gaussian_fwhm, amplitude=1.0,
                   baseline=0.0, n_points=200, noise=0.0, seed=0, span_fwhm=8.0):
    """Forward-model spectrum with seeded multiplicative Gaussian noise.

    The per-point sigma stored with the spectrum is the noise fraction of
    the model, floored at 1e-3 of the peak (a detection noise floor keeps
    the far tails from acquiring unbounded weight).
    """
    total = voigt_fwhm(lorentzian_fwhm, gaussian_fwhm)
    f = center + np.linspace(-0.5 * span_fwhm * total, 0.5 * span_fwhm * total, n_points)
    model = voigt_profile(f, center, lorentzian_fwhm, gaussian_fwhm, amplitude, baseline)
    if noise == 0.0:
        return Spectrum(freq_ghz=f, intensity=model)
    rng = np.random.default_rng(seed)
    peak = model.max()
    sigma = noise * np.maximum(np.abs(model), 1e-3 * peak)
    y = model + sigma * rng.standard_normal(n_points)
    return Spectrum(freq_ghz=f, intensity=np.maximum(y, 0.0), sigma=sigma)


def _initial_guess(spec):
    f, y = spec.freq_ghz, spec.intensity
    base = float(y.min())
    w = y - base
    tot = w.sum()
    center = float((f * w).sum() / tot) if tot > 0 else float(f[f.size // 2])
    half = 0.5 * w.max()
    above = w >= half
    idx = np.nonzero(above)[0]
    if idx.size >= 2:
        fwhm = float(f[idx[-1]] - f[idx[0]])
    else:
        fwhm = float((f[-1] - f[0]) / 10.0)
    fwhm = max(fwhm, 3.0 * float(np.diff(f).mean()))
    width = fwhm / 1.6376  # equal-split Voigt components
    area = float(np.trapezoid(w, f))
    if area <= 0:
        area = w.max() * fwhm
    return center, width, width, area, base


def fit_voigt(spec, initial=None, max_iter=200, rel_tol=1e-8):
    """Weighted Voigt fit by Levenberg-Marquardt damping.

    Widths are fitted in log space so they stay positive without
    constraints.  Parameter uncertainties come from the inverse of the
    (damped-free) normal-equations matrix at the solution, scaled by the
    reduced chi-square when the spectrum carries no per-point sigma.
    Non-convergence is reported through the ``converged`` flag with the
    best point found.
    """
    if spec.freq_ghz.size < 20:
        raise ValueError("need at least 20 samples to fit")
    if initial is None:
        c0, gl0, gg0, a0, b0 = _initial_guess(spec)
    else:
        c0, gl0, gg0, a0, b0 = initial
    total0 = voigt_fwhm(gl0, gg0)
    span = spec.freq_ghz[-1] - spec.freq_ghz[0]
    if span < 3.0 * total0:
        raise ValueError(
            f"spectrum spans {span:.3g} GHz, need >= 3 estimated total FWHM ({3 * total0:.3g})"
        )
    weights = 1.0 / spec.sigma if spec.sigma is not None else np.ones_like(spec.intensity)

    p = np.array([c0, math.log(max(gl0, 1e-12)), math.log(max(gg0, 1e-12)), a0, b0])

    def residuals(q):
        model = voigt_profile(spec.freq_ghz, q[0], math.exp(q[1]), math.exp(q[2]), q[3], q[4])
        return (model - spec.intensity) * weights

    def jacobian(q):
        j = np.empty((spec.freq_ghz.size, 5))
        for k in range(5):
            h = 1e-6 * max(1.0, abs(q[k])) if k in (0, 3, 4) else 1e-6
            qp = q.copy(); qp[k] += h
            qm = q.copy(); qm[k] -= h
            j[:, k] = (residuals(qp) - residuals(qm)) / (2.0 * h)
        return j

    r = residuals(p)
    chi2 = float(r @ r)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        j = jacobian(p)
        a = j.T @ j
        g = j.T @ r
        step_ok = False
        for _ in range(50):
            try:
                delta = np.linalg.solve(a + lam * np.diag(np.diag(a).clip(min=1e-30)), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = residuals(p + delta)
            chi2_new = float(r_new @ r_new)
            if chi2_new <= chi2:
                step_ok = True
                break
            lam *= 5.0
        if not step_ok:
            break
        p = p + delta
        r = r_new
        improved = chi2 - chi2_new
        chi2 = chi2_new
        lam = max(lam / 3.0, 1e-12)
        if np.max(np.abs(delta) / (1.0 + np.abs(p))) < rel_tol:
            converged = True
            break
        if improved <= 1e-30 * max(chi2, 1e-300):
            converged = True
            break

    j = jacobian(p)
    a = j.T @ j
    dof = max(spec.freq_ghz.size - 5, 1)
    red_chi2 = chi2 / dof
    cov = np.linalg.pinv(a)
    if spec.sigma is None:
        cov = cov * red_chi2
    perr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    gl = math.exp(p[1])
    gg = math.exp(p[2])
    return VoigtFit(
        center_ghz=float(p[0]),
        lorentzian_fwhm_ghz=gl,
        gaussian_fwhm_ghz=gg,
        amplitude=float(p[3]),
        baseline=float(p[4]),
        center_sigma=float(perr[0]),
        lorentzian_sigma=gl * float(perr[1]),
        gaussian_sigma=gg * float(perr[2]),
        amplitude_sigma=float(perr[3]),
        baseline_sigma=float(perr[4]),
        reduced_chi2=red_chi2,
        converged=converged,
        n_iter=it,
    )


def linewidth_ghz_to_radps(fwhm_ghz):
    """FWHM in GHz (ordinary frequency) to angular rad/ps at the dynamics boundary."""
    return 2.0 * math.pi * fwhm_ghz * 1e-3


def write_spectrum_csv(spec, path):
    if spec.sigma is not None:
        data = np.column_stack([spec.freq_ghz, spec.intensity, spec.sigma])
        header = "freq_ghz,intensity,sigma"
    else:
        data = np.column_stack([spec.freq_ghz, spec.intensity])
        header = "freq_ghz,intensity"
    np.savetxt(path, data, delimiter=",", header=header, fmt="%.12g")


def read_spectrum_csv(path):
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    sigma = data[:, 2] if data.shape[1] > 2 else None
    return Spectrum(freq_ghz=data[:, 0], intensity=data[:, 1], sigma=sigma)


def fit_to_dict(fit):
    return {
        "center_ghz": fit.center_ghz,
        "lorentzian_fwhm_ghz": fit.lorentzian_fwhm_ghz,
        "gaussian_fwhm_ghz": fit.gaussian_fwhm_ghz,
        "amplitude": fit.amplitude,
        "baseline": fit.baseline,
        "center_sigma": fit.center_sigma,
        "lorentzian_sigma": fit.lorentzian_sigma,
        "gaussian_sigma": fit.gaussian_sigma,
        "amplitude_sigma": fit.amplitude_sigma,
        "baseline_sigma": fit.baseline_sigma,
        "reduced_chi2": fit.reduced_chi2,
        "converged": fit.converged,
        "n_iter": fit.n_iter,
    }
