"""Independent ground-truth engines for the analytic model.

* A discrete Poisson bath of point dipoles, summed spin by spin.
* The exact spin-1/2 pseudospin product for a CPMG/XY8 sequence.
* Direct quadratures (geometric factor, Lorentzian-filter overlap) and the
  exact Fourier transform of the piecewise-constant modulation function.

Randomness: every cubic cell (edge = NV depth) of the sampling grid owns a
PCG64 stream keyed by ``(seed, cell index)``. Realizations are therefore
reproducible, independent of evaluation order, and nested: growing ``r_max``
only adds spins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import integrate

from . import _kernels
from .core import NuclearSample, NvCenter, SemiInfinite, Slab
from .model import dipolar_prefactor, filter_function_sq_exact, geometric_factor_reduced, k_infinite

__all__ = [
    "MIN_RMAX_FACTOR",
    "EPS_MIN",
    "SpinBathRealization",
    "GeometricSum",
    "PseudospinCouplings",
    "BridgeReport",
    "region_bounds",
    "region_volume",
    "expected_count",
    "truncation_tail_bound",
    "truncation_tail",
    "geometric_factor_quadrature",
    "sample_bath",
    "geometric_sum",
    "stream_geometric_sum",
    "dipolar_couplings",
    "pseudospin_signal",
    "kappa_brms_bridge",
    "modulation_intervals",
    "filter_function_sq_time_domain",
    "functional_quadrature",
    "PseudospinComparison",
    "compare_pseudospin",
]

MIN_RMAX_FACTOR = 10.0
EPS_MIN = 1e-3
MAX_TAIL_FRACTION = 0.01


# ---------------------------------------------------------------------------
# region geometry
# ---------------------------------------------------------------------------


def region_bounds(nv: NvCenter, geometry) -> tuple[float, float]:
    """Heights (h1, h2) of the sample layer measured from the NV along the surface normal."""
    if isinstance(geometry, SemiInfinite):
        return nv.depth, math.inf
    if isinstance(geometry, Slab):
        return nv.depth + geometry.z1, nv.depth + geometry.z2
    raise TypeError(f"unknown geometry {geometry!r}")


def _cap(r_max: float, h: float) -> float:
    # volume of the ball of radius r_max above the plane z = h
    if h >= r_max:
        return 0.0
    return math.pi / 3.0 * (r_max - h) ** 2 * (2.0 * r_max + h)


def region_volume(nv: NvCenter, geometry, r_max: float) -> float:
    h1, h2 = region_bounds(nv, geometry)
    return _cap(r_max, h1) - (_cap(r_max, h2) if math.isfinite(h2) else 0.0)


def expected_count(sample: NuclearSample, nv: NvCenter, r_max: float) -> float:
    return sample.rho * region_volume(nv, sample.geometry, r_max)


def truncation_tail_bound(nv: NvCenter, geometry, r_max: float) -> float:
    """Upper bound on the fraction of Gamma~ lying outside radius ``r_max``.

    Uses u_z^2 (1 - u_z^2) integrated over a hemisphere (4 pi / 15 for any
    axis) so the outer region contributes at most 4 pi / (45 r_max^3).
    """
    total = geometric_factor_reduced(nv.alpha, nv.depth, geometry)
    return 4.0 * math.pi / (45.0 * r_max**3) / total


def _polar_weight(alpha: float) -> np.polynomial.Polynomial:
    """Azimuth-integrated u_z^2 (1 - u_z^2) as a polynomial in x = cos(theta)."""
    P = np.polynomial.Polynomial
    x = P([0.0, 1.0])
    a2 = (math.cos(alpha) * x) ** 2
    b2 = math.sin(alpha) ** 2 * (1.0 - x * x)
    return 2.0 * math.pi * (a2 + 0.5 * b2 - a2 * a2 - 3.0 * a2 * b2 - 0.375 * b2 * b2)


def truncation_tail(nv: NvCenter, geometry, r_max: float) -> float:
    """Integral of u_z^2 (1 - u_z^2) / r^6 over the sample region outside ``r_max`` (m^-3).

    Computed by quadrature in spherical coordinates; with ``r_max = 0`` this
    is the full geometric factor.
    """
    h1, h2 = region_bounds(nv, geometry)
    weight = _polar_weight(nv.alpha).integ()

    def radial(r):
        lo = h1 / r
        hi = min(h2 / r, 1.0) if math.isfinite(h2) else 1.0
        if lo >= hi:
            return 0.0
        return (weight(hi) - weight(lo)) / r**4

    start = max(r_max, h1)
    # integrate in s = h1 / r to map the infinite range onto (0, h1/start]
    smax = h1 / start
    val, _ = integrate.quad(lambda s: radial(h1 / s) * h1 / s**2, 0.0, smax,
                            epsabs=0.0, epsrel=1e-12, limit=500,
                            points=[h1 / h2] if math.isfinite(h2) and h1 / h2 < smax else None)
    return val


def geometric_factor_quadrature(nv: NvCenter, geometry=None) -> float:
    """Gamma~ by direct quadrature of the defining integral."""
    return truncation_tail(nv, SemiInfinite() if geometry is None else geometry, 0.0)


# ---------------------------------------------------------------------------
# bath sampling
# ---------------------------------------------------------------------------


def _zigzag(i: int) -> int:
    return 2 * i if i >= 0 else -2 * i - 1


def _cell_rng(seed: int, ix: int, iy: int, iz: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_zigzag(ix), _zigzag(iy), _zigzag(iz)))
    return np.random.Generator(np.random.PCG64(ss))


def _check_rmax(nv: NvCenter, sample: NuclearSample, r_max: float) -> None:
    if not r_max >= MIN_RMAX_FACTOR * nv.depth:
        raise ValueError(
            f"r_max={r_max:.3e} m is below {MIN_RMAX_FACTOR:g} x NV depth ({nv.depth:.3e} m)"
        )
    bound = truncation_tail_bound(nv, sample.geometry, r_max)
    if bound > MAX_TAIL_FRACTION:
        raise ValueError(f"truncation bias bound {bound:.2%} exceeds {MAX_TAIL_FRACTION:.0%} at r_max={r_max:.3e} m")


def _iter_cells(sample: NuclearSample, nv: NvCenter, r_max: float, seed: int) -> Iterator[np.ndarray]:
    """Yield candidate positions (m, NV at origin) cell by cell."""
    h1, h2 = region_bounds(nv, sample.geometry)
    L = nv.depth
    lam = sample.rho * L**3
    if lam == 0.0:
        return
    n_xy = int(math.ceil(r_max / L))
    z_top = min(h2, r_max)
    iz0 = int(math.floor(h1 / L))
    iz1 = int(math.ceil(z_top / L))
    for iz in range(iz0, iz1):
        z0 = iz * L
        if z0 + L < h1 or z0 > z_top:
            continue
        zn = max(z0, 0.0)
        for ix in range(-n_xy, n_xy):
            x0 = ix * L
            dx = 0.0 if x0 <= 0.0 <= x0 + L else min(abs(x0), abs(x0 + L))
            for iy in range(-n_xy, n_xy):
                y0 = iy * L
                dy = 0.0 if y0 <= 0.0 <= y0 + L else min(abs(y0), abs(y0 + L))
                if dx * dx + dy * dy + zn * zn > r_max * r_max:
                    continue
                rng = _cell_rng(seed, ix, iy, iz)
                n = rng.poisson(lam)
                if n == 0:
                    continue
                pts = rng.random((n, 3))
                pts *= L
                pts += (x0, y0, z0)
                yield pts


def _region_mask(pts: np.ndarray, h1: float, h2: float, r_max: float, r_min: float) -> np.ndarray:
    r2 = np.einsum("ij,ij->i", pts, pts)
    z = pts[:, 2]
    return (z >= h1) & (z <= h2) & (r2 <= r_max * r_max) & (r2 >= r_min * r_min)


@dataclass(frozen=True, eq=False)
class SpinBathRealization:
    """Frozen positions (m, lab frame, NV at the origin, surface normal +z)."""

    positions: np.ndarray
    seed: int
    r_max: float
    sample: NuclearSample
    depth: float
    expected: float = field(default=0.0)

    @property
    def n_spins(self) -> int:
        return int(self.positions.shape[0])


def sample_bath(sample: NuclearSample, nv: NvCenter, r_max: float, seed: int) -> SpinBathRealization:
    """Poisson realization of the nuclear layer within ``r_max`` of the NV."""
    _check_rmax(nv, sample, r_max)
    h1, h2 = region_bounds(nv, sample.geometry)
    r_min = EPS_MIN * nv.depth
    chunks = [p[_region_mask(p, h1, h2, r_max, r_min)] for p in _iter_cells(sample, nv, r_max, seed)]
    pos = np.concatenate(chunks) if chunks else np.zeros((0, 3))
    pos.setflags(write=False)
    return SpinBathRealization(pos, int(seed), float(r_max), sample, nv.depth, expected_count(sample, nv, r_max))


# ---------------------------------------------------------------------------
# geometric factor estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeometricSum:
    n_spins: int
    gamma_tilde: float  # m^-3, raw sum / rho
    gamma_tilde_stderr: float
    tail: float  # analytic contribution beyond r_max, m^-3
    gamma: float  # T^2, sum_j D_j^2 u_z^2 (1 - u_z^2)
    b_rms_sq: float  # T^2, (9/4) gamma
    b_rms_sq_stderr: float
    seed: int
    r_max: float

    @property
    def gamma_tilde_corrected(self) -> float:
        return self.gamma_tilde + self.tail

    def relative_deviation(self, reference: float, corrected: bool = True) -> float:
        est = self.gamma_tilde_corrected if corrected else self.gamma_tilde
        return est / reference - 1.0


def _finish_sum(n, s1, s2, sample, nv, r_max, seed) -> GeometricSum:
    rho = sample.rho
    d2 = dipolar_prefactor(sample, nv) ** 2
    gt = s1 / rho if rho > 0 else 0.0
    se = math.sqrt(s2) / rho if rho > 0 else 0.0
    tail = truncation_tail(nv, sample.geometry, r_max) if rho > 0 else 0.0
    gamma = d2 * s1
    return GeometricSum(
        n_spins=n, gamma_tilde=gt, gamma_tilde_stderr=se, tail=tail,
        gamma=gamma, b_rms_sq=2.25 * gamma, b_rms_sq_stderr=2.25 * d2 * math.sqrt(s2),
        seed=seed, r_max=r_max,
    )


def geometric_sum(bath: SpinBathRealization, nv: NvCenter) -> GeometricSum:
    """Dipole sum over a materialized realization."""
    n, s1, s2 = _kernels.accumulate_geometry(bath.positions, -math.inf, math.inf, math.inf, 0.0, nv.axis())
    return _finish_sum(n, s1, s2, bath.sample, nv, bath.r_max, bath.seed)


def stream_geometric_sum(sample: NuclearSample, nv: NvCenter, r_max: float, seed: int) -> GeometricSum:
    """Same estimate as ``geometric_sum(sample_bath(...))`` without storing positions."""
    _check_rmax(nv, sample, r_max)
    h1, h2 = region_bounds(nv, sample.geometry)
    r_min = EPS_MIN * nv.depth
    axis = nv.axis()
    n_tot = 0
    parts1: list[float] = []
    parts2: list[float] = []
    for pts in _iter_cells(sample, nv, r_max, seed):
        n, s1, s2 = _kernels.accumulate_geometry(pts, h1, h2, r_max * r_max, r_min * r_min, axis)
        n_tot += n
        parts1.append(s1)
        parts2.append(s2)
    return _finish_sum(n_tot, math.fsum(parts1), math.fsum(parts2), sample, nv, r_max, seed)


# ---------------------------------------------------------------------------
# pseudospin picture
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PseudospinCouplings:
    """Per-spin dipolar coupling vectors A_z (rad/s) in the NV frame, shape (n, 3)."""

    a_z_vec: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_z_vec, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "a_z_vec", a)

    @property
    def kappa_sq(self) -> np.ndarray:
        return self.a_z_vec[:, 0] ** 2 + self.a_z_vec[:, 1] ** 2

    def __len__(self) -> int:
        return self.a_z_vec.shape[0]


def dipolar_couplings(bath: SpinBathRealization, nv: NvCenter) -> PseudospinCouplings:
    """A_z^j = gamma_e D_j (3 u_x u_z, 3 u_y u_z, 3 u_z^2 - 1) in the NV frame."""
    pos = bath.positions
    if pos.shape[0] == 0:
        return PseudospinCouplings(np.zeros((0, 3)))
    r2 = np.einsum("ij,ij->i", pos, pos)
    r = np.sqrt(r2)
    u = (pos @ nv.frame().T) / r[:, None]
    dj = dipolar_prefactor(bath.sample, nv) / (r2 * r)
    scale = nv.constants.gamma_e * dj
    a = np.empty_like(u)
    a[:, 0] = 3.0 * u[:, 0] * u[:, 2]
    a[:, 1] = 3.0 * u[:, 1] * u[:, 2]
    a[:, 2] = 3.0 * u[:, 2] ** 2 - 1.0
    a *= scale[:, None]
    return PseudospinCouplings(a)


def pseudospin_signal(couplings: PseudospinCouplings, omega_L: float, n_pulses: int, tau,
                      approximate: bool = False):
    """Product over spins of the exact spin-1/2 pseudospin signal S^j.

    ``approximate`` uses the weak-coupling form 1 - (kappa^2/8)|g(omega_L)|^2
    with the all-harmonic filter; its removable singularity at
    cos(omega_L tau / 2) = 0 is resolved analytically.
    """
    if n_pulses % 2:
        raise ValueError("pseudospin product requires an even number of pulses")
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if len(couplings) == 0:
        return np.ones_like(tau)
    logs, sign = _kernels.pseudospin_log_signal(couplings.a_z_vec, omega_L, tau, n_pulses, approximate)
    return sign * np.exp(logs)


@dataclass(frozen=True)
class BridgeReport:
    sum_kappa_sq: float  # (rad/s)^2
    four_ge2_brms2: float  # 4 gamma_e^2 B_RMS^2
    n_spins: int

    @property
    def relative_difference(self) -> float:
        if self.sum_kappa_sq == 0.0 and self.four_ge2_brms2 == 0.0:
            return 0.0
        return abs(self.sum_kappa_sq - self.four_ge2_brms2) / max(abs(self.four_ge2_brms2), abs(self.sum_kappa_sq))


def kappa_brms_bridge(bath: SpinBathRealization, nv: NvCenter) -> BridgeReport:
    """Compare sum_j kappa_j^2 with 4 gamma_e^2 B_RMS^2 of the same realization."""
    kap = dipolar_couplings(bath, nv).kappa_sq
    gs = geometric_sum(bath, nv)
    ge = nv.constants.gamma_e
    return BridgeReport(math.fsum(kap), 4.0 * ge**2 * gs.b_rms_sq, bath.n_spins)


# ---------------------------------------------------------------------------
# time-domain filter and quadrature oracles
# ---------------------------------------------------------------------------


def modulation_intervals(tau: float, n_pulses: int) -> tuple[np.ndarray, np.ndarray]:
    """Edges and signs of g(t): intervals tau/2, tau, ..., tau, tau/2 with alternating sign."""
    edges = np.concatenate([[0.0], tau / 2.0 + tau * np.arange(n_pulses), [n_pulses * tau]])
    signs = (-1.0) ** np.arange(n_pulses + 1)
    return edges, signs


def filter_function_sq_time_domain(omega, tau: float, n_pulses: int):
    """|integral g(t) exp(-i w t) dt|^2 evaluated interval by interval."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    edges, signs = modulation_intervals(tau, n_pulses)
    a, b = edges[:-1], edges[1:]
    out = np.empty(omega.shape)
    for i, w in enumerate(omega):
        if w == 0.0:
            g = np.sum(signs * (b - a))
        else:
            g = np.sum(signs * (np.exp(-1j * w * a) - np.exp(-1j * w * b))) / (1j * w)
        out[i] = abs(g) ** 2
    return out


def functional_quadrature(n_pulses: int, tau: float, omega_l: float, t2n: float) -> float:
    """integral of l(w - omega_L) (N tau)^2 sinc^2[(N tau/2)(w - pi/tau)] dw by quadrature.

    ``l`` is the unit-area Lorentzian of half-width 1/t2n. The substitution
    u = u0 + w tan(theta) turns the Lorentzian into a flat measure on
    (-pi/2, pi/2).
    """
    total = n_pulses * tau
    u0 = 0.5 * total * (omega_l - math.pi / tau)
    hw = 0.5 * total / t2n

    def f(theta):
        u = u0 + hw * math.tan(theta)
        return 1.0 if u == 0.0 else (math.sin(u) / u) ** 2

    # break points where the sinc argument crosses the main lobe
    pts = sorted({math.atan((c - u0) / hw) for c in (-math.pi, 0.0, math.pi)})
    val, _ = integrate.quad(f, -0.5 * math.pi, 0.5 * math.pi, points=pts, limit=2000,
                            epsabs=0.0, epsrel=1e-9)
    return total**2 * val / math.pi


# ---------------------------------------------------------------------------
# pseudospin vs exponential form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PseudospinComparison:
    product: float  # exact pseudospin product
    exponential: float  # exp(-(2/pi^2) gamma_e^2 B_RMS^2 K) with the realization's B_RMS^2
    max_spin_dip: float  # largest weak-coupling per-spin dip (kappa^2/8)|g|^2
    n_spins: int

    @property
    def abs_difference(self) -> float:
        return abs(self.product - self.exponential)

    @property
    def log_relative_difference(self) -> float:
        """|ln C_product / ln C_exp - 1|, the relative mismatch of the dip exponents."""
        le = math.log(self.exponential)
        if le == 0.0:
            return 0.0 if self.product == 1.0 else math.inf
        return abs(math.log(self.product) / le - 1.0)


def compare_pseudospin(bath: SpinBathRealization, nv: NvCenter, omega_L: float, n_pulses: int,
                       tau: float) -> PseudospinComparison:
    """Evaluate both contrast forms on one realization at a single tau."""
    cp = dipolar_couplings(bath, nv)
    gs = geometric_sum(bath, nv)
    prod = float(pseudospin_signal(cp, omega_L, n_pulses, tau)[0])
    ge = nv.constants.gamma_e
    expo = math.exp(-2.0 / math.pi**2 * ge**2 * gs.b_rms_sq * k_infinite(n_pulses, tau, omega_L))
    g2 = filter_function_sq_exact(omega_L, tau, n_pulses)
    md = float(cp.kappa_sq.max()) / 8.0 * g2 if len(cp) else 0.0
    return PseudospinComparison(prod, expo, md, bath.n_spins)
