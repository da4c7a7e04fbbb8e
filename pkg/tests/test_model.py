import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from nvdepth.core import MAGIC_ANGLE, NuclearSample, NvCenter, SemiInfinite, Slab
from nvdepth.model import (
    ContrastModelParams,
    SpectralDensityParams,
    b_rms_squared,
    contrast,
    dip_exponent,
    dip_position,
    dipolar_prefactor,
    filter_function_sq,
    filter_function_sq_exact,
    geometric_factor_reduced,
    k_finite,
    k_finite_closed_form,
    k_infinite,
    sinc,
)
from nvdepth.oracle import (
    filter_function_sq_time_domain,
    functional_quadrature,
    geometric_factor_quadrature,
    modulation_intervals,
)

NM = 1e-9
WL = 2.68e8 * 0.0197


# ---------------------------------------------------------------------------
# geometric factor and B_RMS
# ---------------------------------------------------------------------------


def test_gamma_tilde_alpha_zero():
    g = geometric_factor_reduced(0.0, 10 * NM) * NM**3
    assert g == pytest.approx(math.pi / 36e3, rel=1e-14)
    assert g == pytest.approx(8.727e-5, rel=1e-4)


def test_gamma_tilde_magic_angle():
    g = geometric_factor_reduced(MAGIC_ANGLE, 10 * NM) * NM**3
    assert g == pytest.approx(5 * math.pi / 216e3, rel=1e-14)
    assert g == pytest.approx(7.272e-5, rel=1e-4)


@pytest.mark.parametrize("alpha", [0.0, 0.4, MAGIC_ANGLE, 1.2, math.pi / 2])
def test_gamma_tilde_matches_quadrature(alpha):
    nv = NvCenter(7 * NM, alpha)
    ref = geometric_factor_quadrature(nv)
    assert geometric_factor_reduced(alpha, nv.depth) == pytest.approx(ref, rel=1e-10)


def test_slab_matches_quadrature():
    nv = NvCenter(5 * NM, 0.9)
    slab = Slab(2 * NM, 11 * NM)
    ref = geometric_factor_quadrature(nv, slab)
    assert geometric_factor_reduced(nv.alpha, nv.depth, slab) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("alpha,d", [(0.0, 3 * NM), (MAGIC_ANGLE, 10 * NM), (1.3, 30 * NM)])
def test_thick_slab_tends_to_semi_infinite(alpha, d):
    semi = geometric_factor_reduced(alpha, d)
    thick = geometric_factor_reduced(alpha, d, Slab(0.0, 1e3 * d))
    assert thick / semi == pytest.approx(1.0, abs=1e-6)
    assert geometric_factor_reduced(alpha, d, Slab(0.0, math.inf)) == semi


def test_gamma_tilde_rejects_bad_depth():
    for d in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            geometric_factor_reduced(0.0, d)


@given(st.floats(0, math.pi / 2), st.floats(1.0, 100.0), st.floats(0.01, 100.0))
def test_gamma_tilde_cubic_scaling(alpha, d_nm, c):
    a = geometric_factor_reduced(alpha, c * d_nm * NM)
    b = geometric_factor_reduced(alpha, d_nm * NM) / c**3
    assert a == pytest.approx(b, rel=1e-13)


@given(st.floats(0, math.pi / 2), st.floats(1.0, 100.0))
def test_gamma_tilde_maximal_at_alpha_zero(alpha, d_nm):
    assert geometric_factor_reduced(alpha, d_nm * NM) <= geometric_factor_reduced(0.0, d_nm * NM)


@given(st.floats(0, math.pi / 2), st.floats(1.0, 50.0),
       st.lists(st.integers(0, 2000), min_size=3, max_size=3, unique=True))
def test_slab_additivity(alpha, d_nm, zs):
    z1, z2, z3 = sorted(0.1 * z * NM for z in zs)
    a = geometric_factor_reduced(alpha, d_nm * NM, Slab(z1, z2))
    b = geometric_factor_reduced(alpha, d_nm * NM, Slab(z2, z3))
    c = geometric_factor_reduced(alpha, d_nm * NM, Slab(z1, z3))
    assert a + b == pytest.approx(c, rel=1e-12)


def test_b_rms_empty_sample():
    assert b_rms_squared(NvCenter(10 * NM), NuclearSample(rho=0.0)) == 0.0


def test_b_rms_immersion_oil_10nm():
    b = math.sqrt(b_rms_squared(NvCenter(10 * NM), NuclearSample.immersion_oil()))
    assert b == pytest.approx(3.0e-7, rel=0.02)


def test_b_rms_depth_doubling():
    s = NuclearSample()
    a = b_rms_squared(NvCenter(7 * NM), s)
    b = b_rms_squared(NvCenter(14 * NM), s)
    assert a / b == pytest.approx(8.0, rel=1e-14)


def test_b_rms_is_nine_quarters_gamma_and_magic_angle_form():
    # (9/4) rho D^2 Gamma~ equals rho D^2 5 pi / (96 d^3) at the magic angle
    nv, s = NvCenter(10 * NM), NuclearSample()
    pref2 = dipolar_prefactor(s, nv) ** 2
    b2 = b_rms_squared(nv, s)
    assert b2 == pytest.approx(2.25 * s.rho * pref2 * geometric_factor_reduced(nv.alpha, nv.depth), rel=1e-14)
    assert b2 == pytest.approx(s.rho * pref2 * 5 * math.pi / (96 * nv.depth**3), rel=1e-14)


@pytest.mark.parametrize("alpha", [0.0, 0.7, MAGIC_ANGLE, math.pi / 2])
def test_b_rms_general_alpha_128_form(alpha):
    nv, s = NvCenter(6 * NM, alpha), NuclearSample()
    ref = s.rho * dipolar_prefactor(s, nv) ** 2 * math.pi * (8 - 3 * math.sin(alpha) ** 4) / (128 * nv.depth**3)
    assert b_rms_squared(nv, s) == pytest.approx(ref, rel=1e-14)


# ---------------------------------------------------------------------------
# filter function
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [8, 32, 64])
def test_filter_resonant_value(n):
    tau = 600e-9
    val = filter_function_sq(math.pi / tau, tau, n, k_max=0)
    assert val == pytest.approx((2 / math.pi) ** 2 * (n * tau) ** 2, rel=1e-12)


@pytest.mark.parametrize("n", [8, 16, 64])
@pytest.mark.parametrize("k_max", [8, 16, 32])
def test_filter_dc_response_small(n, k_max):
    tau = 600e-9
    peak = filter_function_sq(math.pi / tau, tau, n, k_max)
    assert filter_function_sq(0.0, tau, n, k_max) <= 1e-3 * peak
    assert filter_function_sq_time_domain(0.0, tau, n)[0] == pytest.approx(0.0, abs=1e-30)


@pytest.mark.parametrize("n", [8, 16, 64, 128, 7])
@pytest.mark.parametrize("k_max", [32, 64])
def test_filter_harmonic_sum_matches_all_k_form(n, k_max):
    tau = 596e-9
    w = np.linspace(0.9, 1.1, 2001) * math.pi / tau
    h = filter_function_sq(w, tau, n, k_max)
    e = filter_function_sq_exact(w, tau, n)
    peak = e.max()
    # relative check away from the exact zeros of |g|^2, absolute check on them
    lobe = e >= 1e-6 * peak
    np.testing.assert_allclose(h[lobe], e[lobe], rtol=1e-2)
    assert np.max(np.abs(h - e)) <= 1e-2 * peak


@pytest.mark.parametrize("n", [1, 2, 7, 8, 64])
def test_all_k_form_equals_time_domain_transform(n, rng):
    tau = 250e-9
    w = rng.uniform(0.01, 12.0, 200) * math.pi / tau
    np.testing.assert_allclose(filter_function_sq_exact(w, tau, n),
                               filter_function_sq_time_domain(w, tau, n),
                               rtol=1e-8, atol=1e-12 * (n * tau) ** 2)


@pytest.mark.parametrize("n", [1, 2, 3, 8, 64, 127])
def test_dc_null_on_piecewise_modulation(n):
    tau = 0.37
    edges, signs = modulation_intervals(tau, n)
    assert len(signs) == n + 1
    widths = np.diff(edges)
    np.testing.assert_allclose(widths[[0, -1]], tau / 2)
    np.testing.assert_allclose(widths[1:-1], tau)
    assert abs(np.sum(signs * widths)) < 1e-12 * n * tau


def test_longitudinal_correlator_does_not_contribute():
    # the longitudinal term enters through |g(0)|^2 only
    for n in (8, 16, 33):
        assert filter_function_sq_exact(0.0, 600e-9, n) == 0.0


# ---------------------------------------------------------------------------
# sequence functionals
# ---------------------------------------------------------------------------


def test_sinc_convention():
    assert sinc(0.0) == 1.0
    assert sinc(math.pi) == pytest.approx(0.0, abs=1e-16)
    assert sinc(1.3) == pytest.approx(math.sin(1.3) / 1.3, rel=1e-15)


@pytest.mark.parametrize("n", [8, 64])
def test_k_infinite_on_resonance(n):
    tau = math.pi / WL
    assert k_infinite(n, tau, WL) == pytest.approx((n * tau) ** 2, rel=1e-15)


def test_k_infinite_at_sinc_zero():
    n, tau = 32, 600e-9
    wl = math.pi / tau + 2 * math.pi / (n * tau)
    assert k_infinite(n, tau, wl) < 1e-20 * (n * tau) ** 2


def test_k_infinite_high_precision_reference():
    n, tau, wl = 64, 596e-9, 5.28e6
    mpmath.mp.dps = 50
    T = mpmath.mpf(n) * mpmath.mpf(tau)
    x = T / 2 * (mpmath.mpf(wl) - mpmath.pi / mpmath.mpf(tau))
    ref = T**2 * (mpmath.sin(x) / x) ** 2
    assert k_infinite(n, tau, wl) == pytest.approx(float(ref), rel=1e-12)


def test_k_finite_resonance_at_t2n_equal_duration():
    n, t2 = 64, 40e-6
    tau = t2 / n
    val = k_finite(n, tau, math.pi / tau, t2)
    assert val / t2**2 == pytest.approx(2 * math.exp(-1), rel=1e-12)
    assert val / t2**2 == pytest.approx(0.73576, abs=1e-5)


def test_k_finite_short_sequence_limit():
    n, tau = 32, 600e-9
    T = n * tau
    for t2 in (10 * T, 100 * T, 1e4 * T):
        r = k_finite(n, tau, math.pi / tau, t2) / T**2
        # on resonance the leading correction is -T / (3 t2n)
        assert r == pytest.approx(1 - T / (3 * t2), abs=(T / t2) ** 2)


def test_k_finite_infinite_t2n_is_k_infinite(rng):
    n = 64
    tau = rng.uniform(0.9, 1.1, 50) * math.pi / WL
    np.testing.assert_allclose(k_finite(n, tau, WL, math.inf), k_infinite(n, tau, WL), rtol=1e-13)


def test_k_finite_matches_closed_form_where_well_conditioned(rng):
    for _ in range(50):
        n = int(rng.choice([8, 16, 32, 64, 128]))
        tau = rng.uniform(0.8, 1.2) * math.pi / WL
        t2 = rng.uniform(0.3, 5.0) * n * tau
        assert k_finite(n, tau, WL, t2) == pytest.approx(k_finite_closed_form(n, tau, WL, t2), rel=1e-7)


def test_k_finite_matches_quadrature(rng):
    for _ in range(10):
        n = int(rng.choice([8, 32, 128]))
        tau = rng.uniform(0.95, 1.05) * math.pi / WL
        t2 = 10 ** rng.uniform(-1, 2) * n * tau
        assert k_finite(n, tau, WL, t2) == pytest.approx(functional_quadrature(n, tau, WL, t2), rel=1e-6)


def test_k_finite_rejects_nonpositive_t2n():
    with pytest.raises(ValueError):
        k_finite(8, 1e-7, WL, 0.0)


@given(st.sampled_from([8, 16, 64, 256]), st.floats(0.5, 1.5), st.floats(1e-3, 1e3))
def test_functionals_nonnegative(n, x, t2_ratio):
    tau = x * math.pi / WL
    assert k_infinite(n, tau, WL) >= 0
    assert k_finite(n, tau, WL, t2_ratio * n * tau) >= 0


@given(st.sampled_from([8, 16, 64]), st.floats(0.8, 1.2), st.floats(0.05, 20.0))
def test_lorentzian_broadening_lowers_peak(n, x, t2_ratio):
    tau = math.pi / WL
    assert k_finite(n, tau, WL, t2_ratio * n * tau) <= k_infinite(n, tau, WL) * (1 + 1e-12)


# ---------------------------------------------------------------------------
# spectral density
# ---------------------------------------------------------------------------


def test_spectral_density_normalisation():
    sp = SpectralDensityParams(2.0e-13, WL, 50e-6)
    hw = 1 / sp.t2n_star
    # integrate in units of the half-width so quad sees an O(1) feature
    area, _ = integrate.quad(lambda u: hw * sp.lineshape(WL + hw * u), -np.inf, np.inf)
    assert area == pytest.approx(1.0, rel=1e-8)
    total, _ = integrate.quad(lambda u: hw * sp.spectral_density(WL + hw * u), -WL / hw, np.inf)
    # one-sided integral picks up the +omega_L line and a negligible image tail
    assert total == pytest.approx(math.pi * sp.b_rms_sq, rel=1e-4)
    assert sp.transverse_correlator(WL) == pytest.approx(
        0.25 * math.pi * (sp.lineshape(WL) + sp.lineshape(-WL)), rel=1e-15)


def test_spectral_density_validation():
    with pytest.raises(ValueError):
        SpectralDensityParams(-1.0, WL)
    with pytest.raises(ValueError):
        SpectralDensityParams(1.0, 0.0)
    with pytest.raises(ValueError):
        SpectralDensityParams(1.0, WL).lineshape(WL)


def test_lorentzian_convolution_gives_k_finite(rng):
    # (4/pi) f^xx is the two-sided lineshape; folding it with the resonant
    # sinc^2 term of |g|^2 must give the closed-form functional
    t2 = 40e-6
    sp = SpectralDensityParams(1.0, WL, t2)
    hw = 1 / t2
    u = np.linspace(-20000, 20000, 1_000_001)
    w = WL + hw * u
    for _ in range(3):
        n = int(rng.choice([16, 64]))
        tau = rng.uniform(0.98, 1.02) * math.pi / WL
        val = np.trapezoid(4 / math.pi * sp.transverse_correlator(w) * k_infinite(n, tau, w), w)
        assert val == pytest.approx(k_finite(n, tau, WL, t2), rel=1e-3)


# ---------------------------------------------------------------------------
# contrast
# ---------------------------------------------------------------------------


def _params(depth_nm=10.0, rho=68e27, t2=math.inf, n=64, wl=WL):
    return ContrastModelParams(NvCenter(depth_nm * NM), NuclearSample(rho=rho, t2n_star=t2), n, wl)


def test_contrast_without_bath_is_one():
    tau = np.linspace(500e-9, 700e-9, 50)
    np.testing.assert_array_equal(contrast(_params(rho=0.0), tau), 1.0)


def test_contrast_monotone_in_depth():
    tau = math.pi / WL
    vals = [contrast(_params(d), tau) for d in np.linspace(3, 30, 40)]
    assert np.all(np.diff(vals) > 0)


def test_contrast_reference_example():
    p = _params(10.0, n=64)
    tau = math.pi / WL
    mpmath.mp.dps = 40
    ge = mpmath.mpf(p.nv.constants.gamma_e)
    ref = mpmath.exp(-(2 / mpmath.pi**2) * ge**2 * mpmath.mpf(p.b_rms_sq) * (64 * mpmath.mpf(tau)) ** 2)
    assert contrast(p, tau) == pytest.approx(float(ref), rel=1e-13)


@given(st.floats(2.0, 50.0), st.floats(0.9, 1.1), st.sampled_from([8, 32, 128]), st.floats(1e-6, 1e-3))
def test_contrast_in_unit_interval(depth_nm, x, n, t2):
    for t in (math.inf, t2):
        c = contrast(_params(depth_nm, t2=t, n=n), x * math.pi / WL)
        assert 0 < c <= 1


@given(st.floats(0.1, 10.0))
def test_log_contrast_linear_in_b_rms_sq(c):
    tau = np.linspace(0.98, 1.02, 11) * math.pi / WL
    base = np.log(contrast(_params(12.0, rho=10e27), tau))
    scaled = np.log(contrast(_params(12.0, rho=c * 10e27), tau))
    np.testing.assert_allclose(scaled, c * base, rtol=1e-12)


def test_off_resonant_terms_reproduce_two_harmonic_filter():
    p = _params(10.0, n=64)
    tau = np.linspace(0.9, 1.1, 101) * math.pi / WL
    ge = p.nv.constants.gamma_e
    ref = 0.5 * ge**2 * p.b_rms_sq * filter_function_sq(WL, tau, 64, k_max=0)
    np.testing.assert_allclose(dip_exponent(p, tau, include_off_resonant=True), ref, rtol=1e-10)


def test_off_resonant_terms_are_weak_near_resonance():
    p = _params(10.0, n=64)
    tau = np.linspace(0.99, 1.01, 21) * math.pi / WL
    a = dip_exponent(p, tau)
    b = dip_exponent(p, tau, include_off_resonant=True)
    assert np.max(np.abs(b - a)) < 0.02 * a.max()


def test_dip_position():
    assert dip_position(math.pi) == 1.0
    assert dip_position(5.28e6) == pytest.approx(595e-9, rel=1e-3)
    assert dip_position(4.31e7) == pytest.approx(72.9e-9, rel=1e-3)
    with pytest.raises(ValueError):
        dip_position(0.0)


def test_contrast_params_validation():
    with pytest.raises(ValueError):
        ContrastModelParams(NvCenter(1e-8), NuclearSample(), 0, WL)
    with pytest.raises(ValueError):
        ContrastModelParams(NvCenter(1e-8), NuclearSample(), 8, WL, family="UDD")
