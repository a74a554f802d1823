import math

import numpy as np
import pytest
from scipy.integrate import quad

from rapsim.spectra import (
    Spectrum,
    fit_to_dict,
    fit_voigt,
    linewidth_ghz_to_radps,
    read_spectrum_csv,
    synth_spectrum,
    voigt_fwhm,
    voigt_profile,
    write_spectrum_csv,
)


def runs_test_pvalue(residuals):
    """Wald-Wolfowitz runs test on the residual signs."""
    signs = np.sign(residuals[residuals != 0])
    n_pos = int(np.sum(signs > 0))
    n_neg = int(np.sum(signs < 0))
    if n_pos == 0 or n_neg == 0:
        return 0.0
    runs = 1 + int(np.count_nonzero(np.diff(signs)))
    n = n_pos + n_neg
    mu = 2.0 * n_pos * n_neg / n + 1.0
    var = (mu - 1.0) * (mu - 2.0) / (n - 1.0)
    z = (runs - mu) / math.sqrt(var)
    return math.erfc(abs(z) / math.sqrt(2.0))


class TestVoigtProfile:
    def test_lorentzian_limit(self):
        f = np.linspace(-5, 5, 801)
        gamma = 0.5
        exact = (gamma / math.pi) / (f**2 + gamma**2)
        out = voigt_profile(f, 0.0, 1.0, 0.0)
        assert np.abs(out - exact).max() < 1e-6 * exact.max()

    def test_gaussian_limit(self):
        f = np.linspace(-5, 5, 801)
        sg = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        exact = np.exp(-0.5 * (f / sg) ** 2) / (sg * math.sqrt(2 * math.pi))
        out = voigt_profile(f, 0.0, 0.0, 1.0)
        assert np.abs(out - exact).max() < 1e-6 * exact.max()

    @pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.5])
    def test_numeric_convolution_oracle(self, x):
        gl, gg = 0.48, 0.55
        gamma = gl / 2.0
        sg = gg / (2.0 * math.sqrt(2.0 * math.log(2.0)))

        def integrand(u):
            lor = (gamma / math.pi) / ((x - u) ** 2 + gamma**2)
            gau = math.exp(-0.5 * (u / sg) ** 2) / (sg * math.sqrt(2 * math.pi))
            return lor * gau

        oracle = quad(integrand, -60, 60, limit=400)[0]
        value = float(voigt_profile(np.array([x]), 0.0, gl, gg)[0])
        assert value == pytest.approx(oracle, rel=1e-6)

    def test_equal_width_fwhm_olivero_longbothum(self):
        f = np.linspace(-8, 8, 400001)
        prof = voigt_profile(f, 0.0, 1.0, 1.0)
        above = f[prof >= prof.max() / 2]
        measured = above[-1] - above[0]
        assert measured == pytest.approx(1.6376, rel=2e-4)
        assert voigt_fwhm(1.0, 1.0) == pytest.approx(1.6376, rel=1e-4)

    def test_symmetry_about_center(self):
        f = np.linspace(-6, 6, 1201)
        prof = voigt_profile(f, 0.0, 0.7, 0.4)
        assert np.allclose(prof, prof[::-1], rtol=1e-12)

    def test_integral_stable_under_refinement(self):
        # Richardson-style: the quadrature of the profile converges
        span = 60.0
        vals = []
        for n in (2001, 4001):
            f = np.linspace(-span, span, n)
            vals.append(np.trapezoid(voigt_profile(f, 0.0, 0.5, 0.5, amplitude=2.0), f))
        assert abs(vals[1] - vals[0]) < 1e-4 * 2.0

    def test_both_widths_zero_rejected(self):
        with pytest.raises(ValueError):
            voigt_profile(np.array([0.0]), 0.0, 0.0, 0.0)

    def test_unit_conversion_boundary(self):
        assert linewidth_ghz_to_radps(0.39) == pytest.approx(2 * math.pi * 0.39e-3)


class TestFitVoigt:
    def test_noiseless_round_trip_paper_widths(self):
        spec = synth_spectrum(0.2, 0.48, 0.55, amplitude=3.0, baseline=0.1, n_points=300)
        fit = fit_voigt(spec)
        assert fit.converged
        assert fit.lorentzian_fwhm_ghz == pytest.approx(0.48, rel=0.01)
        assert fit.gaussian_fwhm_ghz == pytest.approx(0.55, rel=0.01)
        assert fit.center_ghz == pytest.approx(0.2, abs=1e-6)
        assert fit.amplitude == pytest.approx(3.0, rel=1e-6)
        assert fit.baseline == pytest.approx(0.1, abs=1e-6)

    def test_noiseless_residuals_at_numerical_floor(self):
        spec = synth_spectrum(0.0, 0.48, 0.55, n_points=240)
        fit = fit_voigt(spec)
        model = voigt_profile(spec.freq_ghz, fit.center_ghz, fit.lorentzian_fwhm_ghz,
                              fit.gaussian_fwhm_ghz, fit.amplitude, fit.baseline)
        assert np.abs(model - spec.intensity).max() < 1e-8 * spec.intensity.max()

    def test_pure_lorentzian_gaussian_component_consistent_with_zero(self):
        spec = synth_spectrum(0.0, 0.39, 0.0, n_points=250)
        fit = fit_voigt(spec)
        assert fit.lorentzian_fwhm_ghz == pytest.approx(0.39, rel=1e-3)
        assert fit.gaussian_fwhm_ghz <= max(2.0 * fit.gaussian_sigma, 1e-4 * 0.39)

    def test_noisy_round_trip(self):
        spec = synth_spectrum(0.0, 0.48, 0.55, n_points=200, noise=0.02, seed=3)
        fit = fit_voigt(spec)
        assert fit.lorentzian_fwhm_ghz == pytest.approx(0.48, rel=0.10)
        assert fit.gaussian_fwhm_ghz == pytest.approx(0.55, rel=0.10)
        assert 0.5 < fit.reduced_chi2 < 2.0

    def test_noisy_residuals_pass_runs_test(self):
        spec = synth_spectrum(0.0, 0.48, 0.55, n_points=200, noise=0.02, seed=11)
        fit = fit_voigt(spec)
        model = voigt_profile(spec.freq_ghz, fit.center_ghz, fit.lorentzian_fwhm_ghz,
                              fit.gaussian_fwhm_ghz, fit.amplitude, fit.baseline)
        assert runs_test_pvalue(spec.intensity - model) > 0.05

    def test_translation_invariance(self):
        a = fit_voigt(synth_spectrum(0.0, 0.5, 0.4, n_points=200))
        b = fit_voigt(synth_spectrum(7.5, 0.5, 0.4, n_points=200))
        assert b.center_ghz - a.center_ghz == pytest.approx(7.5, abs=1e-9)
        assert b.lorentzian_fwhm_ghz == pytest.approx(a.lorentzian_fwhm_ghz, rel=1e-9)
        assert b.gaussian_fwhm_ghz == pytest.approx(a.gaussian_fwhm_ghz, rel=1e-9)

    def test_amplitude_scaling_invariance(self):
        a = fit_voigt(synth_spectrum(0.0, 0.5, 0.4, amplitude=1.0, n_points=200))
        b = fit_voigt(synth_spectrum(0.0, 0.5, 0.4, amplitude=40.0, n_points=200))
        assert b.lorentzian_fwhm_ghz == pytest.approx(a.lorentzian_fwhm_ghz, rel=1e-6)
        assert b.amplitude == pytest.approx(40.0 * a.amplitude, rel=1e-6)

    def test_too_few_samples_rejected(self):
        spec = synth_spectrum(0.0, 0.5, 0.5, n_points=200)
        with pytest.raises(ValueError, match="20 samples"):
            fit_voigt(Spectrum(spec.freq_ghz[:12], spec.intensity[:12]))

    def test_narrow_span_rejected(self):
        f = np.linspace(-0.4, 0.4, 60)
        y = voigt_profile(f, 0.0, 0.48, 0.55)
        with pytest.raises(ValueError, match="span"):
            fit_voigt(Spectrum(f, y), initial=(0.0, 0.48, 0.55, 1.0, 0.0))


class TestSynthSpectrum:
    def test_zero_noise_exact_forward_model(self):
        spec = synth_spectrum(0.0, 0.5, 0.4, amplitude=2.0, baseline=0.3, n_points=100)
        model = voigt_profile(spec.freq_ghz, 0.0, 0.5, 0.4, 2.0, 0.3)
        assert np.array_equal(spec.intensity, model)
        assert spec.sigma is None

    def test_seed_determinism(self):
        a = synth_spectrum(0.0, 0.5, 0.4, noise=0.02, seed=5)
        b = synth_spectrum(0.0, 0.5, 0.4, noise=0.02, seed=5)
        c = synth_spectrum(0.0, 0.5, 0.4, noise=0.02, seed=6)
        assert np.array_equal(a.intensity, b.intensity)
        assert not np.array_equal(a.intensity, c.intensity)

    def test_validation(self):
        with pytest.raises(ValueError, match="increasing"):
            Spectrum(np.array([0.0, 0.0, 1.0]), np.array([1.0, 2.0, 1.0]))
        with pytest.raises(ValueError, match="non-negative"):
            Spectrum(np.array([0.0, 1.0]), np.array([1.0, -2.0]))


class TestSpectrumIO:
    def test_csv_round_trip_with_sigma(self, tmp_path):
        spec = synth_spectrum(0.1, 0.5, 0.4, noise=0.02, seed=2, n_points=64)
        path = tmp_path / "spec.csv"
        write_spectrum_csv(spec, path)
        back = read_spectrum_csv(path)
        assert np.allclose(back.freq_ghz, spec.freq_ghz, rtol=1e-10)
        assert np.allclose(back.intensity, spec.intensity, rtol=1e-10)
        assert np.allclose(back.sigma, spec.sigma, rtol=1e-10)

    def test_fit_dict_keys(self):
        fit = fit_voigt(synth_spectrum(0.0, 0.5, 0.4, n_points=120))
        payload = fit_to_dict(fit)
        assert payload["converged"] is True
        assert set(payload) >= {"center_ghz", "lorentzian_fwhm_ghz", "gaussian_fwhm_ghz",
                                "reduced_chi2"}
