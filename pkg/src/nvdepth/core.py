"""Physical constants, unit conversions and immutable domain types.

All quantities are stored in strict SI (m, s, T, rad/s). Conversion helpers
exist for the lab units that appear at file and CLI boundaries (nm, ns, us,
G, kHz).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np
from scipy import constants as _sc

__all__ = [
    "MAGIC_ANGLE",
    "PROTON_GAMMA",
    "IMMERSION_OIL_RHO",
    "PhysicalConstants",
    "DEFAULT_CONSTANTS",
    "NvCenter",
    "SemiInfinite",
    "Slab",
    "NuclearSample",
    "PulseSequence",
    "StaticField",
    "larmor_frequency",
    "nm_to_m",
    "m_to_nm",
    "gauss_to_tesla",
    "tesla_to_gauss",
]

#: NV axis tilt for a {100} surface, atan(sqrt(2)) ~ 54.7356 deg.
MAGIC_ANGLE = math.atan(math.sqrt(2.0))
#: Proton gyromagnetic ratio used by default (rad/s/T).
PROTON_GAMMA = 2.68e8
#: Proton density of Nikon Type NF immersion oil, 68 nm^-3, in m^-3.
IMMERSION_OIL_RHO = 68e27


def nm_to_m(x):
    return x / 1e9


def m_to_nm(x):
    return x * 1e9


def gauss_to_tesla(x):
    return x / 1e4


def tesla_to_gauss(x):
    return x * 1e4


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants in SI. ``gamma_e`` is the NV electron gyromagnetic ratio."""

    gamma_e: float = _sc.physical_constants["electron gyromag. ratio"][0]
    mu0_over_4pi: float = _sc.mu_0 / (4.0 * math.pi)
    hbar: float = _sc.hbar
    kB: float = _sc.k

    def __post_init__(self):
        if not abs(self.gamma_e / 1.76e11 - 1.0) < 5e-3:
            raise ValueError(f"gamma_e={self.gamma_e:g} is not an electron gyromagnetic ratio")
        for name in ("mu0_over_4pi", "hbar", "kB"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class NvCenter:
    """NV centre at ``depth`` (m) below the surface, axis tilted by ``alpha`` (rad)."""

    depth: float
    alpha: float = MAGIC_ANGLE
    constants: PhysicalConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if not (math.isfinite(self.depth) and self.depth > 0):
            raise ValueError(f"NV depth must be positive and finite, got {self.depth!r}")
        if not (0.0 <= self.alpha <= math.pi / 2):
            raise ValueError(f"alpha must lie in [0, pi/2], got {self.alpha!r}")

    @classmethod
    def from_nm(cls, depth_nm: float, alpha_deg: float | None = None, **kw) -> "NvCenter":
        alpha = MAGIC_ANGLE if alpha_deg is None else math.radians(alpha_deg)
        return cls(nm_to_m(depth_nm), alpha, **kw)

    @property
    def depth_nm(self) -> float:
        return m_to_nm(self.depth)

    def axis(self) -> np.ndarray:
        """NV quantisation axis in the lab frame (surface normal is +z)."""
        return np.array([math.sin(self.alpha), 0.0, math.cos(self.alpha)])

    def frame(self) -> np.ndarray:
        """Rows are the NV x, y, z axes expressed in lab coordinates."""
        s, c = math.sin(self.alpha), math.cos(self.alpha)
        return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


@dataclass(frozen=True)
class SemiInfinite:
    """Sample fills the whole half-space above the diamond surface."""

    kind: Literal["semi_infinite"] = "semi_infinite"


@dataclass(frozen=True)
class Slab:
    """Laterally infinite layer between heights ``z1`` and ``z2`` (m) above the surface."""

    z1: float
    z2: float
    kind: Literal["slab"] = "slab"

    def __post_init__(self):
        if not (self.z1 >= 0 and self.z2 > self.z1) or math.isnan(self.z2):
            raise ValueError(f"slab requires 0 <= z1 < z2, got z1={self.z1!r}, z2={self.z2!r}")
        if not math.isfinite(self.z1):
            raise ValueError("slab z1 must be finite")


Geometry = Union[SemiInfinite, Slab]


@dataclass(frozen=True)
class NuclearSample:
    """Spin-1/2 nuclear bath.

    ``t2n_star`` is the nuclear dephasing time in seconds; ``math.inf`` selects
    the infinite-T2n* (delta-line) model.
    """

    rho: float = IMMERSION_OIL_RHO
    gamma_n: float = PROTON_GAMMA
    t2n_star: float = math.inf
    geometry: Geometry = field(default_factory=SemiInfinite)
    spin_I: float = 0.5

    def __post_init__(self):
        # rho == 0 is accepted as the empty sample
        if not (math.isfinite(self.rho) and self.rho >= 0):
            raise ValueError(f"rho must be finite and non-negative, got {self.rho!r}")
        if self.spin_I != 0.5:
            raise ValueError("only spin-1/2 nuclei are supported")
        if not (self.t2n_star > 0):
            raise ValueError(f"t2n_star must be positive or inf, got {self.t2n_star!r}")
        if not isinstance(self.geometry, (SemiInfinite, Slab)):
            raise TypeError(f"unknown geometry {self.geometry!r}")

    @property
    def infinite_t2n(self) -> bool:
        return math.isinf(self.t2n_star)

    @classmethod
    def immersion_oil(cls, **kw) -> "NuclearSample":
        return cls(rho=IMMERSION_OIL_RHO, gamma_n=PROTON_GAMMA, **kw)


@dataclass(frozen=True)
class StaticField:
    b0: float  # tesla

    def __post_init__(self):
        if not (math.isfinite(self.b0) and self.b0 > 0):
            raise ValueError(f"b0 must be positive, got {self.b0!r}")

    @classmethod
    def from_gauss(cls, gauss: float) -> "StaticField":
        return cls(gauss_to_tesla(gauss))

    @property
    def gauss(self) -> float:
        return tesla_to_gauss(self.b0)


@dataclass(frozen=True, eq=False)
class PulseSequence:
    """XY8-k or CPMG sequence of ``n_pulses`` pi pulses spaced by each ``tau``.

    Both families share the same ideal filter function; for XY8 the pulse count
    must be a multiple of 8 unless ``strict=False``, which only warns.
    """

    family: Literal["XY8", "CPMG"]
    n_pulses: int
    tau_grid: np.ndarray
    strict: bool = True

    def __post_init__(self):
        if self.family not in ("XY8", "CPMG"):
            raise ValueError(f"unknown sequence family {self.family!r}")
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValueError(f"n_pulses must be a positive integer, got {self.n_pulses!r}")
        tau = np.array(self.tau_grid, dtype=float, copy=True).reshape(-1)
        if tau.size == 0 or np.any(tau <= 0) or np.any(np.diff(tau) <= 0):
            raise ValueError("tau grid must be strictly positive and strictly increasing")
        tau.setflags(write=False)
        object.__setattr__(self, "tau_grid", tau)
        object.__setattr__(self, "n_pulses", int(self.n_pulses))
        if self.family == "XY8" and self.n_pulses % 8:
            msg = f"XY8 sequence with N={self.n_pulses} is not a multiple of 8"
            if self.strict:
                raise ValueError(msg)
            warnings.warn(msg, stacklevel=2)

    @property
    def duration(self) -> np.ndarray:
        return self.n_pulses * self.tau_grid


def larmor_frequency(sample: NuclearSample, field: StaticField | float) -> float:
    """Nuclear Larmor frequency gamma_n * B0 in rad/s.

    ``field`` may be a :class:`StaticField` or a bare, non-negative value in tesla.
    """
    b0 = field.b0 if isinstance(field, StaticField) else float(field)
    if not b0 >= 0:
        raise ValueError(f"negative field {b0!r}")
    return sample.gamma_n * b0
