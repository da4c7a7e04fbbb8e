"""Analytic forward model of the NV NMR contrast dip.

The chain is: geometric factor of the nuclear layer -> mean-square field
``B_RMS**2`` -> sequence functional ``K`` (delta line or Lorentzian line) ->
contrast ``exp(-(2/pi^2) gamma_e^2 B_RMS^2 K)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    NuclearSample,
    NvCenter,
    SemiInfinite,
    Slab,
)

__all__ = [
    "SpectralDensityParams",
    "ContrastModelParams",
    "geometric_factor_reduced",
    "dipolar_prefactor",
    "b_rms_squared",
    "filter_function_sq",
    "filter_function_sq_exact",
    "sinc",
    "k_infinite",
    "k_finite",
    "k_finite_closed_form",
    "dip_exponent",
    "contrast",
    "dip_position",
]

_PHI_SERIES_RADIUS = 0.5
_PHI_SERIES_TERMS = 20


def sinc(x):
    """sin(x)/x with sinc(0) = 1 (unnormalised convention)."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def _angular_weight(alpha: float) -> float:
    return math.pi * (8.0 - 3.0 * math.sin(alpha) ** 4)


def geometric_factor_reduced(alpha: float, depth, geometry=None):
    """Reduced dipolar geometric factor Gamma~ in m^-3.

    Semi-infinite layer: ``pi (8 - 3 sin^4 alpha) / (288 d^3)``. A slab between
    heights z1 < z2 replaces ``1/d^3`` by ``1/(d+z1)^3 - 1/(d+z2)^3``.
    """
    geometry = SemiInfinite() if geometry is None else geometry
    d = np.asarray(depth, dtype=float)
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise ValueError("depth must be positive and finite")
    if isinstance(geometry, SemiInfinite):
        inv = 1.0 / d**3
    elif isinstance(geometry, Slab):
        inv = 1.0 / (d + geometry.z1) ** 3 - 1.0 / (d + geometry.z2) ** 3
    else:
        raise TypeError(f"unknown geometry {geometry!r}")
    out = _angular_weight(alpha) / 288.0 * inv
    return float(out) if out.ndim == 0 else out


def dipolar_prefactor(sample: NuclearSample, nv: NvCenter) -> float:
    """mu0 hbar gamma_n / 4 pi, the dipolar field of one spin at unit distance (T m^3)."""
    c = nv.constants
    return c.mu0_over_4pi * c.hbar * sample.gamma_n


def b_rms_squared(nv: NvCenter, sample: NuclearSample, depth=None):
    """Mean-square transverse nuclear field at the NV in T^2.

    Equals ``(9/4) rho (mu0 hbar gamma_n / 4 pi)^2 Gamma~``, i.e.
    ``rho (...)^2 pi (8 - 3 sin^4 alpha) / (128 d^3)``. ``depth`` overrides the
    NV depth (vectorised use in fitting).
    """
    d = nv.depth if depth is None else depth
    gt = geometric_factor_reduced(nv.alpha, d, sample.geometry)
    return 2.25 * sample.rho * dipolar_prefactor(sample, nv) ** 2 * gt


# ---------------------------------------------------------------------------
# filter function
# ---------------------------------------------------------------------------


def filter_function_sq(omega, tau, n_pulses: int, k_max: int = 0):
    """|g(omega, tau, N)|^2 from the harmonic expansion truncated to k in [-k_max-1, k_max]."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    omega = np.asarray(omega, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    total = n_pulses * tau
    ks = np.arange(-k_max - 1, k_max + 1, dtype=float)
    shape = np.broadcast(omega, tau).shape
    om = np.broadcast_to(omega, shape)[..., None]
    ta = np.broadcast_to(tau, shape)[..., None]
    tt = np.broadcast_to(total, shape)[..., None]
    x = 0.5 * tt * (om - (2.0 * ks + 1.0) * np.pi / ta)
    terms = (2.0 / np.pi) * tt * (-1.0) ** ks / (2.0 * ks + 1.0) * np.exp(-1j * x) * sinc(x)
    g = terms.sum(axis=-1)
    out = g.real**2 + g.imag**2
    return float(out) if out.ndim == 0 else out


def _sin_ratio_sq(n: int, y):
    sy = np.sin(y)
    small = np.abs(sy) < 1e-12
    q = np.sin(n * y) / np.where(small, 1.0, sy)
    return np.where(small, float(n) ** 2, q * q)


def filter_function_sq_exact(omega, tau, n_pulses: int):
    """All-harmonic |g|^2 = (16/w^2) sin^4(w tau/4) sin^2(N w tau/2) / cos^2(w tau/2).

    Odd N takes cos^2(N w tau/2) in the numerator. Both are evaluated through
    sin^2(N y)/sin^2(y) with y = pi/2 - w tau/2 reduced modulo pi, which removes
    the 0/0 at the odd harmonics of pi/tau.
    """
    omega = np.asarray(omega, dtype=float)
    tau = np.asarray(tau, dtype=float)
    half = 0.5 * omega * tau
    y = 0.5 * np.pi - half
    y = y - np.floor(y / np.pi + 0.5) * np.pi
    safe = np.where(omega == 0, 1.0, omega)
    out = 16.0 / safe**2 * np.sin(0.5 * half) ** 4 * _sin_ratio_sq(n_pulses, y)
    out = np.where(omega == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# sequence functionals
# ---------------------------------------------------------------------------


def k_infinite(n_pulses: int, tau, omega_l):
    """(N tau)^2 sinc^2[(N tau / 2)(omega_L - pi/tau)] in s^2."""
    tau = np.asarray(tau, dtype=float)
    total = n_pulses * tau
    out = total**2 * sinc(0.5 * total * (omega_l - np.pi / tau)) ** 2
    return float(out) if np.ndim(out) == 0 else out


def _phi(z):
    """(exp(-z) - 1 + z) / z^2 for complex z, series near the origin."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < _PHI_SERIES_RADIUS
    zs = np.where(small, z, 0.0)
    ser = np.zeros_like(zs)
    # Horner over sum_n (-z)^n / (n+2)!
    for n in range(_PHI_SERIES_TERMS - 1, -1, -1):
        ser = ser * (-zs) + 1.0 / math.factorial(n + 2)
    zb = np.where(small, 1.0, z)
    direct = (np.exp(-zb) - 1.0 + zb) / (zb * zb)
    return np.where(small, ser, direct)


def k_finite(n_pulses: int, tau, omega_l, t2n):
    """Sequence functional for a Lorentzian line of half-width 1/t2n (s^2).

    Algebraically identical to the closed form of :func:`k_finite_closed_form`;
    evaluated as ``2 T^2 Re[phi(T/t2n + i delta T)]`` with
    ``phi(z) = (e^-z - 1 + z)/z^2`` and ``delta = omega_L - pi/tau``, which stays
    accurate where the closed form cancels (``T << t2n``, ``delta -> 0``).
    ``t2n = inf`` reproduces :func:`k_infinite`.
    """
    if not np.all(np.asarray(t2n) > 0):
        raise ValueError("t2n must be positive")
    tau = np.asarray(tau, dtype=float)
    total = n_pulses * tau
    delta = omega_l - np.pi / tau
    rate = np.where(np.isinf(t2n), 0.0, 1.0 / np.where(np.isinf(t2n), 1.0, t2n))
    z = total * rate + 1j * delta * total
    out = 2.0 * total**2 * _phi(z).real
    return float(out) if np.ndim(out) == 0 else out


def k_finite_closed_form(n_pulses: int, tau, omega_l, t2n):
    """The printed closed form, term by term; reference only (cancels near T << t2n)."""
    tau = np.asarray(tau, dtype=float)
    total = n_pulses * tau
    delta = omega_l - np.pi / tau
    x2 = (t2n * delta) ** 2
    brace = (
        np.exp(-total / t2n) * ((1.0 - x2) * np.cos(total * delta) - 2.0 * t2n * delta * np.sin(total * delta))
        + total / t2n * (1.0 + x2)
        + x2
        - 1.0
    )
    return 2.0 * t2n**2 / (1.0 + x2) ** 2 * brace


# ---------------------------------------------------------------------------
# contrast
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralDensityParams:
    """Transverse field spectrum ``S_B(w) = pi B_RMS^2 [l(w - wL) + l(w + wL)]``.

    ``l`` is a delta function for infinite ``t2n_star`` and a unit-area
    Lorentzian of half-width ``1/t2n_star`` otherwise.
    """

    b_rms_sq: float
    omega_L: float
    t2n_star: float = math.inf

    def __post_init__(self):
        if not self.b_rms_sq >= 0:
            raise ValueError("b_rms_sq must be >= 0")
        if not self.omega_L > 0:
            raise ValueError("omega_L must be > 0")
        if not self.t2n_star > 0:
            raise ValueError("t2n_star must be > 0")

    def lineshape(self, omega):
        """Unit-area Lorentzian centred on +omega_L (finite t2n_star only)."""
        if math.isinf(self.t2n_star):
            raise ValueError("delta lineshape has no pointwise value")
        w = 1.0 / self.t2n_star
        return w / np.pi / ((np.asarray(omega) - self.omega_L) ** 2 + w * w)

    def transverse_correlator(self, omega):
        """Spin-1/2 transverse correlator f^{xx}(w) = (pi/4)[l(w - wL) + l(w + wL)]."""
        return 0.25 * np.pi * (self.lineshape(omega) + self.lineshape(-np.asarray(omega)))

    def spectral_density(self, omega):
        return np.pi * self.b_rms_sq * (self.lineshape(omega) + self.lineshape(-np.asarray(omega)))


@dataclass(frozen=True)
class ContrastModelParams:
    nv: NvCenter
    sample: NuclearSample
    n_pulses: int
    omega_L: float
    family: str = "XY8"

    def __post_init__(self):
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValueError("n_pulses must be a positive integer")
        if self.family not in ("XY8", "CPMG"):
            raise ValueError(f"unknown sequence family {self.family!r}")
        if not self.omega_L > 0:
            raise ValueError("omega_L must be > 0")

    @property
    def b_rms_sq(self) -> float:
        return b_rms_squared(self.nv, self.sample)

    def spectral(self) -> SpectralDensityParams:
        return SpectralDensityParams(self.b_rms_sq, self.omega_L, self.sample.t2n_star)


def _functional(n_pulses, tau, omega_l, t2n):
    if np.all(np.isinf(t2n)):
        return k_infinite(n_pulses, tau, omega_l)
    return k_finite(n_pulses, tau, omega_l, t2n)


def dip_exponent(params: ContrastModelParams, tau, include_off_resonant: bool = False):
    """``-ln C(tau)``.

    With ``include_off_resonant`` the k = -1 image term is added; for an
    infinite T2n* the sinc cross term is included as well. For a finite T2n*
    the Lorentzian-averaged cross term is dropped.
    """
    tau = np.asarray(tau, dtype=float)
    gamma_e = params.nv.constants.gamma_e
    pref = 2.0 / np.pi**2 * gamma_e**2 * params.b_rms_sq
    n, wl, t2 = params.n_pulses, params.omega_L, params.sample.t2n_star
    k = _functional(n, tau, wl, t2)
    if include_off_resonant:
        # image line at -omega_L sits at offset omega_L + pi/tau
        k = k + _functional(n, tau, -wl, t2)
        if math.isinf(t2):
            total = n * tau
            k = k + 2.0 * total**2 * sinc(0.5 * total * (wl - np.pi / tau)) * sinc(0.5 * total * (wl + np.pi / tau))
    return pref * k


def contrast(params: ContrastModelParams, tau, include_off_resonant: bool = False):
    """Normalised contrast C(tau) in (0, 1]."""
    out = np.exp(-dip_exponent(params, tau, include_off_resonant))
    return float(out) if np.ndim(out) == 0 else out


def dip_position(omega_l: float) -> float:
    """Free-precession time of the first dip, pi / omega_L."""
    if not omega_l > 0:
        raise ValueError("omega_L must be > 0")
    return math.pi / omega_l
