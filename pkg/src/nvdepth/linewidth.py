"""Diffusion-limited linewidth of nanoscale NMR.

Molecules diffuse through the sensing volume of an NV at depth d in a
correlation time tau_d = 2 d^2 / D, which sets a Lorentzian linewidth 2/tau_d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import DEFAULT_CONSTANTS

__all__ = [
    "DiffusionSample",
    "Convention",
    "DEFAULT_TEMPERATURE",
    "diffusion_coefficient",
    "correlation_time",
    "linewidth_fwhm",
    "correlation_time_from_linewidth",
    "t2n_star_equivalent",
    "linewidth_vs_depth",
]

DEFAULT_TEMPERATURE = 293.0

#: "paper" reports 2/tau_d directly in Hz; "angular" treats it as rad/s and divides by 2 pi.
Convention = Literal["paper", "angular"]


@dataclass(frozen=True)
class DiffusionSample:
    """Liquid sample. SI units: m^2/s, kg/m^3, Pa s, m, K.

    D is taken from ``diffusion_coefficient`` if given, otherwise from the
    Stokes-Einstein relation with ``dynamic_viscosity`` or, failing that,
    ``mass_density * kinematic_viscosity``.
    """

    hydrodynamic_radius: float | None = None
    temperature: float = DEFAULT_TEMPERATURE
    kinematic_viscosity: float | None = None
    mass_density: float | None = None
    dynamic_viscosity: float | None = None
    diffusion_coefficient: float | None = None

    def __post_init__(self):
        for name in ("hydrodynamic_radius", "temperature", "kinematic_viscosity", "mass_density",
                     "dynamic_viscosity", "diffusion_coefficient"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if self.diffusion_coefficient is not None and (
            self.dynamic_viscosity is not None or self.kinematic_viscosity is not None
        ):
            raise ValueError("give either a diffusion coefficient or viscosity data, not both")
        if self.dynamic_viscosity is not None and (
            self.kinematic_viscosity is not None or self.mass_density is not None
        ):
            raise ValueError("give either a dynamic viscosity or density and kinematic viscosity, not both")

    @property
    def eta(self) -> float | None:
        if self.dynamic_viscosity is not None:
            return self.dynamic_viscosity
        if self.kinematic_viscosity is not None and self.mass_density is not None:
            return self.mass_density * self.kinematic_viscosity
        return None

    @classmethod
    def immersion_oil(cls, **kw) -> "DiffusionSample":
        """450 cSt, 900 kg/m^3 oil with 1 nm molecules."""
        return cls(hydrodynamic_radius=1e-9, kinematic_viscosity=450e-6, mass_density=900.0, **kw)


def diffusion_coefficient(s: DiffusionSample, kB: float = DEFAULT_CONSTANTS.kB) -> float:
    """D in m^2/s, either given or kB T / (6 pi eta r)."""
    if s.diffusion_coefficient is not None:
        return s.diffusion_coefficient
    missing = []
    eta = s.eta
    if eta is None:
        if s.kinematic_viscosity is None:
            missing.append("kinematic_viscosity")
        if s.mass_density is None:
            missing.append("mass_density")
        missing = ["dynamic_viscosity (or " + " and ".join(missing) + ")"]
    if s.hydrodynamic_radius is None:
        missing.append("hydrodynamic_radius")
    if missing:
        raise ValueError("cannot resolve diffusion coefficient; missing " + ", ".join(missing))
    return kB * s.temperature / (6.0 * math.pi * eta * s.hydrodynamic_radius)


def correlation_time(d_nv, D):
    """tau_d = 2 d^2 / D in s."""
    d_nv = np.asarray(d_nv, dtype=float)
    if np.any(d_nv <= 0) or not D > 0:
        raise ValueError("depth and diffusion coefficient must be positive")
    out = 2.0 * d_nv**2 / D
    return float(out) if out.ndim == 0 else out


def _factor(convention: Convention) -> float:
    if convention == "paper":
        return 1.0
    if convention == "angular":
        return 1.0 / (2.0 * math.pi)
    raise ValueError(f"unknown linewidth convention {convention!r}")


def linewidth_fwhm(tau_d, convention: Convention = "paper"):
    """Lorentzian full width at half maximum in Hz."""
    tau_d = np.asarray(tau_d, dtype=float)
    if np.any(tau_d <= 0):
        raise ValueError("tau_d must be positive")
    out = 2.0 / tau_d * _factor(convention)
    return float(out) if out.ndim == 0 else out


def correlation_time_from_linewidth(fwhm, convention: Convention = "paper"):
    """Inverse of :func:`linewidth_fwhm`."""
    fwhm = np.asarray(fwhm, dtype=float)
    if np.any(fwhm <= 0):
        raise ValueError("linewidth must be positive")
    out = 2.0 * _factor(convention) / fwhm
    return float(out) if out.ndim == 0 else out


def t2n_star_equivalent(tau_d):
    """Nuclear dephasing time whose Lorentzian matches the diffusion line: T2n* = tau_d."""
    if not np.all(np.asarray(tau_d) > 0):
        raise ValueError("tau_d must be positive")
    return tau_d


def linewidth_vs_depth(depths, D: float, convention: Convention = "paper"):
    """Linewidth (Hz) on a grid of depths (m)."""
    return linewidth_fwhm(correlation_time(depths, D), convention)
