"""Synthesis and spectral shaping of the driving pulse.

Produces the complex Rabi envelope Omega(t)*exp(i*phi(t)) that drives the
two-level emitter: transform-limited sech or Gaussian pulses, quadratic
spectral phase (group-delay dispersion, GDD), and the grating-pair
geometry that realises it.

Conventions used throughout the package:

* time in ps, angular frequency in rad/ps, GDD in ps^2;
* the envelope is decomposed on exp(+i*w*t) carriers (numpy FFT
  reconstruction), so the instantaneous detuning is
  Delta(t) = Delta0 + dphi/dt with Delta0 = w_laser - w_transition
  (red-detuned means Delta < 0);
* positive GDD delays the high-frequency components, i.e. the
  instantaneous frequency sweeps from low to high across the pulse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

C_MM_PER_PS = 0.299792458  # speed of light

# intensity FWHM of sech^2(t/tau) in units of tau
SECH_FWHM = 2.0 * math.acosh(math.sqrt(2.0))  # 1.76275
# intensity FWHM of exp(-t^2/T0^2) in units of T0 (amplitude exp(-t^2/2T0^2))
GAUSS_FWHM = 2.0 * math.sqrt(math.log(2.0))  # 1.66511

PULSE_SHAPES = ("sech", "gaussian")


class GridSpanError(ValueError):
    """Time grid cannot contain the (stretched) pulse; carries the span needed."""

    def __init__(self, message, required_span_ps=None):
        super().__init__(message)
        self.required_span_ps = required_span_ps


@dataclass(frozen=True)
class PulseSpec:
    """Transform-limited pulse plus the spectral chirp to apply to it.

    ``fwhm_ps`` is the intensity FWHM of the unchirped pulse and
    ``area_pi`` its pulse area in units of pi.  The area is defined
    before chirping; chirping conserves energy, not area, matching an
    experiment that varies laser power upstream of the stretcher.
    """

    shape: str
    fwhm_ps: float
    area_pi: float
    gdd_ps2: float = 0.0
    detuning_radps: float = 0.0

    def __post_init__(self):
        if self.shape not in PULSE_SHAPES:
            raise ValueError(f"unknown pulse shape {self.shape!r}; expected one of {PULSE_SHAPES}")
        if not self.fwhm_ps > 0:
            raise ValueError(f"fwhm_ps must be positive, got {self.fwhm_ps}")
        if self.area_pi < 0:
            raise ValueError(f"area_pi must be non-negative, got {self.area_pi}")

    @property
    def width_ps(self):
        """Shape parameter tau (sech) or T0 (Gaussian amplitude exp(-t^2/2T0^2))."""
        if self.shape == "sech":
            return self.fwhm_ps / SECH_FWHM
        return self.fwhm_ps / GAUSS_FWHM

    def stretched_fwhm_ps(self, gdd_ps2=None):
        """Gaussian-equivalent estimate of the intensity FWHM after chirping."""
        gdd = self.gdd_ps2 if gdd_ps2 is None else gdd_ps2
        t0 = self.fwhm_ps / GAUSS_FWHM
        return self.fwhm_ps * math.sqrt(1.0 + (gdd / t0**2) ** 2)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    t0_ps: float
    dt_ps: float
    n: int

    def times(self):
        return self.t0_ps + self.dt_ps * np.arange(self.n)

    @property
    def span_ps(self):
        return self.dt_ps * (self.n - 1)


@dataclass(frozen=True, eq=False)
class SampledField:
    """Complex Rabi envelope on a uniform time grid.

    ``envelope`` carries |Omega(t)| in rad/ps and the chirp phase phi(t);
    the carrier detuning Delta0 is kept as separate bookkeeping so a
    transform-limited pulse has an identically real envelope.
    """

    t0_ps: float
    dt_ps: float
    envelope: np.ndarray
    carrier_detuning_radps: float = 0.0

    def __post_init__(self):
        env = np.asarray(self.envelope, dtype=complex)
        object.__setattr__(self, "envelope", env)
        if env.ndim != 1 or env.size < 4:
            raise ValueError("envelope must be a 1-d array with at least 4 samples")
        if not self.dt_ps > 0:
            raise ValueError(f"dt_ps must be positive, got {self.dt_ps}")

    def times(self):
        return self.t0_ps + self.dt_ps * np.arange(self.envelope.size)

    @property
    def span_ps(self):
        return self.dt_ps * (self.envelope.size - 1)

    def scaled(self, factor):
        """Amplitude-scaled copy; pulse area scales by the same factor."""
        return replace(self, envelope=self.envelope * factor)


def default_grid(spec, points_per_fwhm=400, span_fwhm=12.0):
    """Time grid sized for the pulse after chirping.

    dt resolves the stretched envelope (<= stretched FWHM / 400, finer for
    short pulses so the unchirped substructure stays resolved); the span is
    12x the stretched FWHM, centred on the pulse, widened if needed so the
    slow sech tail has decayed below 1e-7 of peak at the grid ends.
    """
    stretched = spec.stretched_fwhm_ps()
    dt = min(spec.fwhm_ps, stretched) / points_per_fwhm
    if spec.shape == "sech":
        tail_half = spec.width_ps * math.log(2e7)  # sech(x) ~ 2 exp(-x)
    else:
        tail_half = spec.width_ps * math.sqrt(2.0 * math.log(1e7))
    span = max(span_fwhm * max(stretched, spec.fwhm_ps), 2.0 * tail_half)
    n = int(round(span / dt))
    if n % 2 == 0:
        n += 1  # odd count: grid symmetric about t = 0 with the peak on a sample
    return TimeGrid(t0_ps=-0.5 * (n - 1) * dt, dt_ps=dt, n=n)


def _envelope_shape(spec, t):
    width = spec.width_ps
    theta = spec.area_pi * math.pi
    if spec.shape == "sech":
        # integral of sech(t/tau) over the real line is pi*tau
        return (theta / (math.pi * width)) / np.cosh(t / width)
    # integral of exp(-t^2/2T0^2) is T0*sqrt(2*pi)
    return (theta / (width * math.sqrt(2.0 * math.pi))) * np.exp(-(t**2) / (2.0 * width**2))


def make_transform_limited(spec, grid=None):
    """Sample an unchirped pulse of exact analytic area ``spec.area_pi * pi``.

    The grid must span at least 8x the pulse FWHM; pass a grid sized by
    :func:`default_grid` on the chirped spec when GDD will be applied next.
    """
    if spec.gdd_ps2 != 0.0:
        raise ValueError("make_transform_limited requires gdd_ps2 = 0; use synthesize() for chirped pulses")
    if grid is None:
        grid = default_grid(spec)
    required = 8.0 * spec.fwhm_ps
    if grid.span_ps < required:
        raise GridSpanError(
            f"grid span {grid.span_ps:.3g} ps too small for a {spec.fwhm_ps:.3g} ps pulse; "
            f"need at least {required:.3g} ps",
            required_span_ps=required,
        )
    t = grid.times()
    env = _envelope_shape(spec, t).astype(complex)
    if spec.area_pi > 0:
        edge = max(abs(env[0]), abs(env[-1])) / abs(env).max()
        if edge > 1e-6:
            raise GridSpanError(
                f"envelope does not decay at the grid ends (edge/peak = {edge:.2e}); "
                f"need span > {required:.3g} ps",
                required_span_ps=required,
            )
    return SampledField(
        t0_ps=grid.t0_ps,
        dt_ps=grid.dt_ps,
        envelope=env,
        carrier_detuning_radps=spec.detuning_radps,
    )


def apply_gdd(field, gdd_ps2):
    """Apply quadratic spectral phase via the FFT.

    The envelope is decomposed on exp(+i*w*t) carriers, so the multiplier
    exp(-i*gdd*w^2/2) delays high frequencies for positive GDD (up-chirp).
    Pulse energy is conserved (Parseval); pulse area is not.
    """
    if gdd_ps2 == 0.0:
        return field
    env = field.envelope
    n = env.size
    w = 2.0 * np.pi * np.fft.fftfreq(n, d=field.dt_ps)
    spectrum = np.fft.fft(env)
    out = np.fft.ifft(spectrum * np.exp(-0.5j * gdd_ps2 * w**2))
    mag = np.abs(out)
    peak = mag.max()
    if peak > 0:
        edge = max(mag[0], mag[-1]) / peak
        if edge > 1e-4:
            required = 12.0 * _stretched_estimate(field, gdd_ps2)
            raise GridSpanError(
                f"stretched pulse reaches {edge:.2e} of peak at the grid edge (limit 1e-4); "
                f"rebuild on a span of ~{required:.3g} ps",
                required_span_ps=required,
            )
    return replace(field, envelope=out)


def _stretched_estimate(field, gdd_ps2):
    """Gaussian-equivalent stretched FWHM from the field's own duration."""
    fwhm = intensity_fwhm(field)
    t0 = fwhm / GAUSS_FWHM
    return fwhm * math.sqrt(1.0 + (gdd_ps2 / t0**2) ** 2)


def synthesize(spec):
    """Transform-limited pulse plus GDD, on a grid sized for the stretched pulse."""
    grid = default_grid(spec)
    tl = make_transform_limited(replace(spec, gdd_ps2=0.0), grid=grid)
    return apply_gdd(tl, spec.gdd_ps2)


def pulse_area(field):
    """Theta = integral of |Omega(t)| dt (trapezoidal)."""
    return float(np.trapezoid(np.abs(field.envelope), dx=field.dt_ps))


def field_energy(field):
    """Integral of |Omega(t)|^2 dt; conserved by apply_gdd."""
    return float(np.trapezoid(np.abs(field.envelope) ** 2, dx=field.dt_ps))


def instantaneous_detuning(field, floor=1e-3):
    """Delta(t) = Delta0 + dphi/dt from the unwrapped envelope phase.

    The phase derivative is extracted by central differences where the
    envelope exceeds ``floor`` of its peak (a contiguous window around the
    maximum); outside that window the linear-chirp least-squares fit of the
    in-window detuning is extrapolated, since the phase of a vanishing
    envelope carries no information.
    """
    env = field.envelope
    mag = np.abs(env)
    peak = mag.max()
    delta0 = field.carrier_detuning_radps
    n = env.size
    if peak == 0.0:
        return np.full(n, delta0)
    ipk = int(np.argmax(mag))
    lo = ipk
    while lo > 0 and mag[lo - 1] >= floor * peak:
        lo -= 1
    hi = ipk
    while hi < n - 1 and mag[hi + 1] >= floor * peak:
        hi += 1
    if hi - lo < 4:
        return np.full(n, delta0)
    phase = np.unwrap(np.angle(env[lo : hi + 1]))
    steps = np.abs(np.diff(phase))
    if steps.size and steps.max() > 0.9 * np.pi:
        raise ValueError(
            f"phase advances {steps.max():.3f} rad between adjacent samples; "
            "grid too coarse for reliable unwrapping (undersampled chirp)"
        )
    dphi = np.gradient(phase, field.dt_ps)
    t = field.times()
    delta = np.empty(n)
    delta[lo : hi + 1] = delta0 + dphi
    # linear-chirp fit for the wings
    slope, intercept = np.polyfit(t[lo : hi + 1], delta[lo : hi + 1], 1)
    delta[:lo] = intercept + slope * t[:lo]
    delta[hi + 1 :] = intercept + slope * t[hi + 1 :]
    return delta


def intensity_fwhm(field):
    """FWHM of |Omega(t)|^2 by linear interpolation of the half-max crossings."""
    inten = np.abs(field.envelope) ** 2
    peak_i = int(np.argmax(inten))
    half = inten[peak_i] / 2.0
    t = field.times()
    above = inten >= half
    if not above.any() or above.all():
        raise ValueError("cannot locate half-maximum crossings on this grid")
    left = peak_i
    while left > 0 and above[left - 1]:
        left -= 1
    right = peak_i
    while right < inten.size - 1 and above[right + 1]:
        right += 1
    if left == 0 or right == inten.size - 1:
        raise ValueError("half-maximum crossings fall outside the grid")

    def _cross(i_out, i_in):
        f = (half - inten[i_out]) / (inten[i_in] - inten[i_out])
        return t[i_out] + f * (t[i_in] - t[i_out])

    return float(_cross(right + 1, right) - _cross(left - 1, left))


@dataclass(frozen=True)
class StretcherGeometry:
    """Parallel grating pair, optionally with a telescope that flips the sign.

    ``effective_separation_mm`` is the grating separation measured along the
    pair normal, folded over all passes.  The emission wavelength is a
    required input; it is not a constant of the model.
    """

    groove_density_per_mm: float
    wavelength_nm: float
    incidence_deg: float
    effective_separation_mm: float
    telescope_inserted: bool = False

    def __post_init__(self):
        if not self.groove_density_per_mm > 0:
            raise ValueError("groove_density_per_mm must be positive")
        if not self.wavelength_nm > 0:
            raise ValueError("wavelength_nm must be positive")


def treacy_gdd(geom):
    """GDD of a parallel grating pair (first diffraction order), in ps^2.

    The bare pair is anomalously dispersive (negative GDD); inserting a
    telescope between the gratings flips the sign without changing the
    magnitude.
    """
    d_mm = 1.0 / geom.groove_density_per_mm
    lam_mm = geom.wavelength_nm * 1e-6
    sin_i = math.sin(math.radians(geom.incidence_deg))
    sin_d = lam_mm / d_mm - sin_i
    if abs(sin_d) >= 1.0:
        raise ValueError(
            f"evanescent diffraction order: |sin(theta_d)| = {abs(sin_d):.4f} >= 1 "
            f"at {geom.wavelength_nm} nm, {geom.groove_density_per_mm} lines/mm, "
            f"{geom.incidence_deg} deg incidence"
        )
    gdd = -(lam_mm**3 * geom.effective_separation_mm) / (
        2.0 * math.pi * C_MM_PER_PS**2 * d_mm**2
    ) * (1.0 - sin_d**2) ** -1.5
    return -gdd if geom.telescope_inserted else gdd


def write_field_csv(field, path):
    """CSV export: t_ps, re_omega, im_omega, delta_radps."""
    delta = instantaneous_detuning(field)
    data = np.column_stack([field.times(), field.envelope.real, field.envelope.imag, delta])
    header = (
        f"dt_ps = {field.dt_ps!r}\n"
        f"carrier_detuning_radps = {field.carrier_detuning_radps!r}\n"
        "t_ps,re_omega,im_omega,delta_radps"
    )
    np.savetxt(path, data, delimiter=",", header=header, fmt="%.12g")
