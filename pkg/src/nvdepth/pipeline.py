"""Measurement processing: fluorescence pairs -> contrast -> normalized dip -> depth.

Traces carry their sequence metadata (:class:`TraceInfo`) so that the
background model ``A exp[-(N tau / T2)^p]`` and the dip model know ``N`` and
``B0`` without side channels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from scipy import optimize

from .core import NuclearSample, NvCenter, MAGIC_ANGLE, PhysicalConstants, DEFAULT_CONSTANTS
from .model import b_rms_squared, k_finite, k_infinite

__all__ = [
    "PipelineError",
    "InsufficientSignalError",
    "BackgroundFitError",
    "FitError",
    "TraceInfo",
    "RawTrace",
    "SignalTrace",
    "NormalizedTrace",
    "BackgroundFit",
    "FitConfig",
    "FitResult",
    "CohortStats",
    "to_signal_contrast",
    "normalize_background",
    "auto_window",
    "stretched_exponential",
    "model_contrast",
    "simulate_trace",
    "dip_amplitude",
    "fit_depth",
    "combine_independent",
    "cohort_stats",
]

log = logging.getLogger(__name__)

MIN_BACKGROUND_POINTS = 6
P_BOUNDS = (0.5, 4.0)
DELTA_CHI2_FINITE = 9.0
DELTA_CHI2_TIE = 1.0
SIGNAL_FACTOR = 2.0


class PipelineError(RuntimeError):
    pass


class InsufficientSignalError(PipelineError):
    pass


class BackgroundFitError(PipelineError):
    def __init__(self, msg, best_residual=None):
        super().__init__(msg)
        self.best_residual = best_residual


class FitError(PipelineError):
    def __init__(self, msg, candidates=()):
        super().__init__(msg)
        self.candidates = list(candidates)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceInfo:
    """Sequence metadata of one trace; ``b0`` in tesla."""

    n_pulses: int
    b0: float
    family: str = "XY8"
    label: str = ""

    def __post_init__(self):
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValueError(f"n_pulses must be a positive integer, got {self.n_pulses!r}")
        if not (math.isfinite(self.b0) and self.b0 > 0):
            raise ValueError(f"b0 must be positive, got {self.b0!r}")
        object.__setattr__(self, "n_pulses", int(self.n_pulses))


def _frozen(a, name, n=None):
    a = np.array(a, dtype=float, copy=True).reshape(-1)
    if n is not None and a.shape[0] != n:
        raise ValueError(f"{name} has {a.shape[0]} rows, expected {n}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    a.setflags(write=False)
    return a


def _check_tau(tau):
    if tau.size == 0 or np.any(tau <= 0) or np.any(np.diff(tau) <= 0):
        raise ValueError("tau must be strictly positive and strictly increasing")


@dataclass(frozen=True, eq=False)
class RawTrace:
    """Fluorescence counts for the two readout projections at each tau (s)."""

    tau: np.ndarray
    f0: np.ndarray
    f1: np.ndarray
    info: TraceInfo
    repetitions: np.ndarray | None = None

    def __post_init__(self):
        tau = _frozen(self.tau, "tau")
        _check_tau(tau)
        n = tau.shape[0]
        f0, f1 = _frozen(self.f0, "f0", n), _frozen(self.f1, "f1", n)
        if np.any(f0 < 0) or np.any(f1 < 0):
            raise ValueError("counts must be non-negative")
        bad = np.flatnonzero(f0 + f1 <= 0)
        if bad.size:
            raise ValueError(f"rows {bad.tolist()} have F0 + F1 = 0")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "f1", f1)
        if self.repetitions is not None:
            reps = _frozen(self.repetitions, "repetitions", n)
            if np.any(reps <= 0):
                raise ValueError("repetitions must be positive")
            object.__setattr__(self, "repetitions", reps)


@dataclass(frozen=True, eq=False)
class SignalTrace:
    """S(tau) = (F0 - F1)/(F0 + F1) with 1-sigma errors."""

    tau: np.ndarray
    s: np.ndarray
    sigma: np.ndarray
    info: TraceInfo

    def __post_init__(self):
        tau = _frozen(self.tau, "tau")
        _check_tau(tau)
        n = tau.shape[0]
        sigma = _frozen(self.sigma, "sigma", n)
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "s", _frozen(self.s, "s", n))
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True, eq=False)
class NormalizedTrace:
    """Normalized contrast C(tau) with 1-sigma errors."""

    tau: np.ndarray
    c: np.ndarray
    sigma: np.ndarray
    info: TraceInfo

    def __post_init__(self):
        tau = _frozen(self.tau, "tau")
        _check_tau(tau)
        n = tau.shape[0]
        sigma = _frozen(self.sigma, "sigma", n)
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "c", _frozen(self.c, "c", n))
        object.__setattr__(self, "sigma", sigma)


def to_signal_contrast(raw: RawTrace) -> SignalTrace:
    """Common-mode normalized contrast with Poisson shot-noise errors.

    sigma = 2 sqrt(F0^2 F1 + F1^2 F0) / (F0 + F1)^2, divided by
    sqrt(repetitions) when given. Rows with zero shot noise (one channel
    empty) get the error of a single count so weights stay finite.
    """
    f0, f1 = raw.f0, raw.f1
    tot = f0 + f1
    s = (f0 - f1) / tot
    sigma = 2.0 * np.sqrt(f0 * f0 * f1 + f1 * f1 * f0) / tot**2
    floor = 2.0 * np.sqrt(tot) / tot**2
    sigma = np.where(sigma > 0, sigma, floor)
    if raw.repetitions is not None:
        sigma = sigma / np.sqrt(raw.repetitions)
    return SignalTrace(raw.tau, s, sigma, raw.info)


# ---------------------------------------------------------------------------
# background normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BackgroundFit:
    """Stretched exponential ``A exp[-(N tau / T2)^p]`` fitted outside the dip window."""

    amplitude: float
    t2: float  # s
    p: float
    window: tuple[float, float]  # excluded tau interval (s)
    n_pulses: int
    chi2_reduced: float
    n_points: int

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("background amplitude must be positive")
        if not self.t2 > 0:
            raise ValueError("background T2 must be positive")
        if not (P_BOUNDS[0] < self.p <= P_BOUNDS[1]):
            raise ValueError(f"stretch exponent {self.p} outside {P_BOUNDS}")

    def __call__(self, tau):
        return stretched_exponential(tau, self.n_pulses, self.amplitude, self.t2, self.p)


def stretched_exponential(tau, n_pulses, amplitude, t2, p):
    return amplitude * np.exp(-((n_pulses * np.asarray(tau, dtype=float) / t2) ** p))


def auto_window(tau: np.ndarray, dip_guess: float, n_pulses: int) -> float:
    """Half-width of the excluded dip window: max(3 grid steps, 4 tau0 / N).

    4 tau0 / N reaches the second zero of the resonant sinc^2 lobe.
    """
    step = float(np.median(np.diff(tau))) if tau.size > 1 else 0.0
    return max(3.0 * step, 4.0 * dip_guess / n_pulses)


def normalize_background(sig: SignalTrace, dip_guess: float, window_half_width: float | None = None,
                         starts_p: Sequence[float] = (1.0, 2.0, 3.0)) -> tuple[NormalizedTrace, BackgroundFit]:
    """Fit the decaying envelope away from the dip and divide it out.

    ``window_half_width=None`` selects :func:`auto_window`. Raises
    :class:`PipelineError` if fewer than six rows remain outside the window and
    :class:`BackgroundFitError` if no start converges.
    """
    tau, s, sigma = sig.tau, sig.s, sig.sigma
    n = sig.info.n_pulses
    if not tau[0] <= dip_guess <= tau[-1]:
        raise ValueError(f"dip guess {dip_guess:.4g} s lies outside the tau range")
    hw = auto_window(tau, dip_guess, n) if window_half_width is None else float(window_half_width)
    window = (dip_guess - hw, dip_guess + hw)
    keep = (tau < window[0]) | (tau > window[1])
    if keep.sum() < MIN_BACKGROUND_POINTS:
        raise PipelineError(
            f"only {int(keep.sum())} background points outside window "
            f"[{window[0]:.4g}, {window[1]:.4g}] s; need {MIN_BACKGROUND_POINTS}"
        )
    tb, sb, eb = tau[keep], s[keep], sigma[keep]
    if np.all(sb <= 0):
        raise BackgroundFitError("background contrast is not positive", None)
    # parameters: log A, log(T2 / N tau_max), p
    tscale = n * tau[-1]
    a0 = float(np.average(sb[sb > 0], weights=1 / eb[sb > 0] ** 2))

    def resid(x):
        return (stretched_exponential(tb, n, math.exp(x[0]), tscale * math.exp(x[1]), x[2]) - sb) / eb

    lo = [-np.inf, math.log(1e-3), P_BOUNDS[0] + 1e-9]
    hi = [np.inf, math.log(1e6), P_BOUNDS[1]]
    best = None
    for p0 in starts_p:
        for lt in (0.0, math.log(3.0), math.log(30.0)):
            try:
                r = optimize.least_squares(resid, [math.log(a0), lt, p0], bounds=(lo, hi), method="trf",
                                           x_scale=[0.1, 1.0, 1.0], xtol=1e-12, ftol=1e-12, gtol=1e-12,
                                           max_nfev=2000)
            except ValueError:
                continue
            if r.status <= 0 or not np.all(np.isfinite(r.fun)):
                continue
            if best is None or r.cost < best.cost - 1e-12 * max(best.cost, 1.0):
                best = r
    if best is None:
        raise BackgroundFitError("background fit did not converge from any start", None)
    dof = max(tb.size - 3, 1)
    fit = BackgroundFit(math.exp(best.x[0]), tscale * math.exp(best.x[1]), float(best.x[2]),
                        window, n, 2.0 * best.cost / dof, int(tb.size))
    bg = fit(tau)
    return NormalizedTrace(tau, s / bg, sigma / bg, sig.info), fit


# ---------------------------------------------------------------------------
# forward model used in fitting
# ---------------------------------------------------------------------------


def model_contrast(tau, n_pulses: int, depth: float, omega_l: float, rate: float,
                   nv: NvCenter, sample: NuclearSample):
    """Contrast at NV depth ``depth`` (m) with Lorentzian rate ``1/T2n*`` (0 for a delta line)."""
    ge = nv.constants.gamma_e
    pref = 2.0 / math.pi**2 * ge**2 * b_rms_squared(nv, sample, depth)
    if rate > 0:
        k = k_finite(n_pulses, tau, omega_l, 1.0 / rate)
    else:
        k = k_infinite(n_pulses, tau, omega_l)
    return np.exp(-pref * np.asarray(k))


def simulate_trace(tau, info: TraceInfo, depth: float, sample: NuclearSample | None = None,
                   alpha: float = MAGIC_ANGLE, omega_l: float | None = None, noise: float = 0.0,
                   seed: int | None = None, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> NormalizedTrace:
    """Synthetic normalized trace from the analytic model with optional Gaussian noise.

    ``noise`` is the absolute 1-sigma on C; the reported sigma equals it
    (or 1e-6 for a noiseless trace, to keep weights finite).
    """
    sample = NuclearSample() if sample is None else sample
    nv = NvCenter(depth, alpha, constants)
    wl = sample.gamma_n * info.b0 if omega_l is None else omega_l
    rate = 0.0 if sample.infinite_t2n else 1.0 / sample.t2n_star
    tau = np.asarray(tau, dtype=float)
    c = model_contrast(tau, info.n_pulses, depth, wl, rate, nv, sample)
    if noise > 0:
        rng = np.random.default_rng(seed)
        c = c + rng.normal(0.0, noise, size=c.shape)
    sigma = np.full(tau.shape, noise if noise > 0 else 1e-6)
    return NormalizedTrace(tau, c, sigma, info)


def dip_amplitude(trace: NormalizedTrace) -> float:
    """Median baseline minus the minimum of the 3-point running mean."""
    c = trace.c
    if c.size >= 3:
        smooth = np.convolve(c, np.ones(3) / 3.0, mode="valid")
    else:
        smooth = c
    return float(np.median(c) - smooth.min())


# ---------------------------------------------------------------------------
# depth fit
# ---------------------------------------------------------------------------


T2nMode = Literal["finite", "infinite", "auto"]


@dataclass(frozen=True)
class FitConfig:
    """Fixed inputs and options of a depth fit.

    ``rho_sigma`` (m^-3) adds the density uncertainty to sigma_d in quadrature.
    ``omega_policy`` "free" lets each field group's Larmor frequency vary
    within ``omega_window`` of gamma_n B0; "fixed" pins it.
    """

    sample: NuclearSample = field(default_factory=NuclearSample)
    alpha: float = MAGIC_ANGLE
    constants: PhysicalConstants = DEFAULT_CONSTANTS
    t2n_mode: T2nMode = "auto"
    omega_policy: Literal["free", "fixed"] = "free"
    omega_window: float = 0.05
    rho_sigma: float = 0.0
    depth_bounds: tuple[float, float] = (1e-9, 100e-9)
    grid_depth: int = 41
    grid_omega: int = 41
    n_starts: int = 4
    check_signal: bool = True

    def __post_init__(self):
        if self.t2n_mode not in ("finite", "infinite", "auto"):
            raise ValueError(f"unknown t2n mode {self.t2n_mode!r}")
        if self.omega_policy not in ("free", "fixed"):
            raise ValueError(f"unknown omega policy {self.omega_policy!r}")
        lo, hi = self.depth_bounds
        if not 0 < lo < hi:
            raise ValueError("depth bounds must satisfy 0 < lo < hi")
        if not 0 < self.omega_window < 1:
            raise ValueError("omega_window must lie in (0, 1)")
        if self.rho_sigma < 0:
            raise ValueError("rho_sigma must be >= 0")
        if self.sample.rho <= 0:
            raise ValueError("depth fits need a positive spin density")


@dataclass(frozen=True, eq=False)
class FitResult:
    """Depth fit outcome. Lengths in m, angular frequencies in rad/s, times in s.

    ``omega_L`` holds one entry per distinct B0 among the fitted traces.
    ``t2n_star`` is ``inf`` for an infinite-T2n* fit (or a finite fit that
    converged onto the delta line). ``covariance`` is in the order of
    ``param_names``.
    """

    depth: float
    depth_sigma: float
    omega_L: np.ndarray
    omega_L_sigma: np.ndarray
    t2n_star: float
    t2n_star_sigma: float
    chi2: float
    chi2_reduced: float
    dof: int
    covariance: np.ndarray
    param_names: tuple[str, ...]
    mode: str
    joint: bool
    n_traces: int
    fixed: dict
    ambiguous: bool = False
    alternatives: tuple = ()
    residuals: tuple = ()
    mode_selection: dict = field(default_factory=dict)

    @property
    def depth_nm(self) -> float:
        return self.depth * 1e9

    @property
    def depth_sigma_nm(self) -> float:
        return self.depth_sigma * 1e9


def _groups(traces: Sequence[NormalizedTrace]):
    """Map each trace to a field group index; B0 equal to 1e-9 relative share omega_L."""
    keys: list[float] = []
    idx = []
    for t in traces:
        for i, b in enumerate(keys):
            if abs(t.info.b0 - b) <= 1e-9 * b:
                idx.append(i)
                break
        else:
            keys.append(t.info.b0)
            idx.append(len(keys) - 1)
    return keys, idx


class _Problem:
    """Residual vector of one or more traces in scaled parameters.

    x = [d (nm), w_1 / w0_1, ..., w_g / w0_g, rate (1/us)] with the omega and
    rate entries present only when free.
    """

    def __init__(self, traces, config: FitConfig, finite: bool):
        self.traces = list(traces)
        self.cfg = config
        self.finite = finite
        self.nv = NvCenter(config.depth_bounds[0], config.alpha, config.constants)
        self.b0s, self.gidx = _groups(self.traces)
        self.w0 = np.array([config.sample.gamma_n * b for b in self.b0s])
        self.free_omega = config.omega_policy == "free"
        self.ng = len(self.b0s) if self.free_omega else 0
        names = ["depth_nm"] + [f"omega_rel_{i}" for i in range(self.ng)]
        if finite:
            names.append("rate_per_us")
        self.names = tuple(names)
        self.n_data = sum(t.tau.size for t in self.traces)

    def unpack(self, x):
        d = x[0] * 1e-9
        if self.free_omega:
            w = self.w0 * np.asarray(x[1:1 + self.ng])
        else:
            w = self.w0
        rate = x[-1] * 1e6 if self.finite else 0.0
        return d, w, rate

    def curves(self, x):
        d, w, rate = self.unpack(x)
        return [model_contrast(t.tau, t.info.n_pulses, d, w[g], rate, self.nv, self.cfg.sample)
                for t, g in zip(self.traces, self.gidx)]

    def resid(self, x):
        return np.concatenate([(m - t.c) / t.sigma for m, t in zip(self.curves(x), self.traces)])

    def bounds(self):
        lo = [self.cfg.depth_bounds[0] * 1e9 * 0.5]
        hi = [self.cfg.depth_bounds[1] * 1e9 * 2.0]
        ow = self.cfg.omega_window
        lo += [1.0 - ow] * self.ng
        hi += [1.0 + ow] * self.ng
        if self.finite:
            lo.append(0.0)
            hi.append(1e3)
        return np.array(lo), np.array(hi)


def _grid_starts(prob: _Problem, n_keep: int) -> list[np.ndarray]:
    """Coarse chi^2 scan over log-spaced depth and a shared omega offset (delta line)."""
    cfg = prob.cfg
    ds = np.geomspace(cfg.depth_bounds[0] * 1e9, cfg.depth_bounds[1] * 1e9, cfg.grid_depth)
    ws = np.linspace(1.0 - cfg.omega_window, 1.0 + cfg.omega_window, cfg.grid_omega) if prob.free_omega else [1.0]
    ge = cfg.constants.gamma_e
    pref_d = 2.0 / math.pi**2 * ge**2 * b_rms_squared(prob.nv, cfg.sample, ds * 1e-9)
    chi = np.zeros((len(ds), len(ws)))
    for t, g in zip(prob.traces, prob.gidx):
        for j, wr in enumerate(ws):
            k = k_infinite(t.info.n_pulses, t.tau, prob.w0[g] * wr)
            m = np.exp(-np.outer(pref_d, k))
            chi[:, j] += np.sum(((m - t.c) / t.sigma) ** 2, axis=1)
    order = np.argsort(chi, axis=None)
    starts, seen = [], []
    for flat in order:
        i, j = np.unravel_index(flat, chi.shape)
        # keep starts that are not grid neighbours of an earlier pick
        if any(abs(i - a) <= 1 and abs(j - b) <= 1 for a, b in seen):
            continue
        seen.append((i, j))
        x = [ds[i]] + [ws[j]] * prob.ng
        starts.append(np.array(x, dtype=float))
        if len(starts) >= n_keep:
            break
    return starts


def _refine(prob: _Problem, starts: list[np.ndarray]):
    lo, hi = prob.bounds()
    out = []
    for x0 in starts:
        rate_starts = [None]
        if prob.finite:
            # delta line and a linewidth comparable to the sequence bandwidth
            total = np.mean([t.info.n_pulses * t.tau.mean() for t in prob.traces])
            rate_starts = [0.0, 1e-6 / total, 0.3e-6 / total]
        for r0 in rate_starts:
            x = np.clip(x0 if r0 is None else np.append(x0, r0), lo, hi)
            try:
                r = optimize.least_squares(prob.resid, x, bounds=(lo, hi), method="trf",
                                           x_scale="jac", xtol=1e-12, ftol=1e-12, gtol=1e-12,
                                           max_nfev=400 * len(x))
            except (ValueError, FloatingPointError) as exc:
                log.debug("refinement failed from %s: %s", x, exc)
                continue
            if r.status > 0 and np.all(np.isfinite(r.fun)):
                out.append(r)
    return out


def _covariance(jac: np.ndarray) -> np.ndarray:
    jtj = jac.T @ jac
    try:
        return np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(jtj)


def _select(prob: _Problem, results):
    """Lowest chi^2; near-ties (delta chi^2 < 1) with a different depth go to the shallower one."""
    results = sorted(results, key=lambda r: r.cost)
    best = results[0]
    chi_best = 2.0 * best.cost
    ties = [r for r in results[1:]
            if 2.0 * r.cost - chi_best < DELTA_CHI2_TIE and abs(r.x[0] - best.x[0]) > 1e-3 * best.x[0]]
    if not ties:
        return best, False, ()
    pool = [best] + ties
    chosen = min(pool, key=lambda r: r.x[0])
    alts = tuple((float(r.x[0]) * 1e-9, 2.0 * float(r.cost)) for r in pool if r is not chosen)
    return chosen, True, alts


def _fit_once(traces, config: FitConfig, finite: bool) -> FitResult:
    prob = _Problem(traces, config, finite)
    n_par = len(prob.names)
    if prob.n_data <= n_par:
        raise FitError(f"{prob.n_data} data points cannot constrain {n_par} parameters")
    starts = _grid_starts(prob, config.n_starts)
    results = _refine(prob, starts)
    if not results:
        raise FitError("no multi-start refinement converged",
                       [(float(s[0]) * 1e-9, float("nan")) for s in starts])
    best, ambiguous, alts = _select(prob, results)
    chi2 = 2.0 * float(best.cost)
    dof = prob.n_data - n_par
    chi2_red = chi2 / dof
    cov = _covariance(best.jac)
    if chi2_red > 1.0:
        cov = cov * chi2_red
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    d, w, rate = prob.unpack(best.x)
    d_sig = sig[0] * 1e-9
    rho = config.sample.rho
    if config.rho_sigma > 0:
        # d scales as rho^(1/3) at fixed dip amplitude
        d_sig = math.hypot(d_sig, d * config.rho_sigma / (3.0 * rho))
    if prob.free_omega:
        w_sig = prob.w0 * sig[1:1 + prob.ng]
    else:
        w_sig = np.zeros_like(prob.w0)
    if finite and rate > 0:
        t2 = 1.0 / rate
        t2_sig = sig[-1] * 1e6 / rate**2
    elif finite:
        t2, t2_sig = math.inf, math.inf
    else:
        t2, t2_sig = math.inf, 0.0
    # covariance reported in SI: d (m), omega (rad/s), rate (1/s)
    scale = np.array([1e-9] + list(prob.w0[:prob.ng]) + ([1e6] if finite else []))
    cov_si = cov * np.outer(scale, scale)
    names = ("depth",) + tuple(f"omega_L[{i}]" for i in range(prob.ng)) + (("rate",) if finite else ())
    fixed = {
        "rho": rho,
        "rho_sigma": config.rho_sigma,
        "alpha": config.alpha,
        "gamma_n": config.sample.gamma_n,
        "gamma_e": config.constants.gamma_e,
        "n_pulses": [t.info.n_pulses for t in prob.traces],
        "b0": list(prob.b0s),
        "omega_policy": config.omega_policy,
    }
    if not prob.free_omega:
        fixed["omega_L"] = prob.w0.tolist()
    resid = tuple(np.asarray(m - t.c) for m, t in zip(prob.curves(best.x), prob.traces))
    return FitResult(
        depth=d, depth_sigma=d_sig, omega_L=np.asarray(w, dtype=float), omega_L_sigma=w_sig,
        t2n_star=t2, t2n_star_sigma=t2_sig, chi2=chi2, chi2_reduced=chi2_red, dof=dof,
        covariance=cov_si, param_names=names, mode="finite" if finite else "infinite",
        joint=len(prob.traces) > 1, n_traces=len(prob.traces), fixed=fixed,
        ambiguous=ambiguous, alternatives=alts, residuals=resid,
    )


def fit_depth(traces: NormalizedTrace | Sequence[NormalizedTrace], config: FitConfig | None = None) -> FitResult:
    """Weighted least-squares depth fit of one trace, or a joint fit of several.

    A joint fit shares the depth and T2n* across all traces and one Larmor
    frequency per distinct B0. In ``auto`` mode both the delta-line and the
    Lorentzian fits are run; the finite-T2n* result is reported when it lowers
    chi^2 by at least 9.
    """
    config = FitConfig() if config is None else config
    if isinstance(traces, NormalizedTrace):
        traces = [traces]
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to fit")
    if config.check_signal:
        for t in traces:
            amp = dip_amplitude(t)
            noise = float(np.median(t.sigma))
            if amp < SIGNAL_FACTOR * noise:
                raise InsufficientSignalError(
                    f"dip amplitude {amp:.3g} is below {SIGNAL_FACTOR:g}x the median noise {noise:.3g}"
                    + (f" in trace {t.info.label!r}" if t.info.label else "")
                )
    if config.t2n_mode == "infinite":
        return _fit_once(traces, config, finite=False)
    if config.t2n_mode == "finite":
        return _fit_once(traces, config, finite=True)
    inf_res = _fit_once(traces, config, finite=False)
    try:
        fin_res = _fit_once(traces, config, finite=True)
    except FitError:
        return replace(inf_res, mode_selection={"chosen": "infinite", "delta_chi2": float("nan")})
    dchi = inf_res.chi2 - fin_res.chi2
    sel = {"delta_chi2": dchi, "threshold": DELTA_CHI2_FINITE,
           "depth_infinite": inf_res.depth, "depth_finite": fin_res.depth}
    if dchi >= DELTA_CHI2_FINITE:
        return replace(fin_res, mode_selection={**sel, "chosen": "finite"})
    return replace(inf_res, mode_selection={**sel, "chosen": "infinite"})


def combine_independent(results: Sequence[FitResult]) -> tuple[float, float]:
    """Inverse-variance weighted mean depth and its 1-sigma error (m)."""
    d = np.array([r.depth for r in results])
    s = np.array([r.depth_sigma for r in results])
    if np.any(s <= 0):
        raise ValueError("all depth uncertainties must be positive")
    w = 1.0 / s**2
    return float(np.sum(w * d) / np.sum(w)), float(1.0 / math.sqrt(np.sum(w)))


# ---------------------------------------------------------------------------
# cohort statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CohortStats:
    mean: float
    std: float
    n: int
    bin_edges: np.ndarray
    counts: np.ndarray


def cohort_stats(depths, bin_width: float = 2.0, start: float = 0.0) -> CohortStats:
    """Mean, n-1 standard deviation and histogram of a set of depths.

    Units are whatever ``depths`` use (nm in reports); the default bins are
    2 units wide starting at 0. Entries may be plain values or
    ``(value, sigma)`` pairs.
    """
    vals = np.array([v[0] if isinstance(v, (tuple, list)) else v for v in depths], dtype=float)
    if vals.size < 2:
        raise ValueError("cohort statistics need at least two depths")
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    top = start + bin_width * max(1, math.ceil((vals.max() - start) / bin_width + 1e-12))
    if vals.max() >= top:
        top += bin_width
    edges = start + bin_width * np.arange(round((top - start) / bin_width) + 1)
    counts, _ = np.histogram(vals, bins=edges)
    return CohortStats(float(vals.mean()), float(vals.std(ddof=1)), int(vals.size), edges, counts)
