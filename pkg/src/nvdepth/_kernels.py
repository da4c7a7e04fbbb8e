"""Hot inner loops of the spin-bath oracle.

Every kernel has a numba implementation and a pure-numpy twin with the same
signature. The numba path is used unless numba is missing or the environment
variable ``NVNMR_DISABLE_NUMBA`` is set to a truthy value at import time.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("NVNMR_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _nb = None

HAVE_NUMBA = _nb is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


def _njit(func):
    if _nb is None:
        return func
    return _nb.njit(cache=True, nogil=True)(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# geometric factor accumulation
# ---------------------------------------------------------------------------


@_njit
def _accumulate_geometry_nb(pts, h1, h2, rmax2, rmin2, ax, ay, az):
    n = 0
    s1 = 0.0
    c1 = 0.0
    s2 = 0.0
    c2 = 0.0
    for i in range(pts.shape[0]):
        x = pts[i, 0]
        y = pts[i, 1]
        z = pts[i, 2]
        if z < h1 or z > h2:
            continue
        r2 = x * x + y * y + z * z
        if r2 > rmax2 or r2 < rmin2:
            continue
        uz2 = (ax * x + ay * y + az * z) ** 2 / r2
        f = uz2 * (1.0 - uz2) / (r2 * r2 * r2)
        n += 1
        # Neumaier compensated sums
        t = s1 + f
        if abs(s1) >= abs(f):
            c1 += (s1 - t) + f
        else:
            c1 += (f - t) + s1
        s1 = t
        f2 = f * f
        t = s2 + f2
        if abs(s2) >= abs(f2):
            c2 += (s2 - t) + f2
        else:
            c2 += (f2 - t) + s2
        s2 = t
    return n, s1 + c1, s2 + c2


def _accumulate_geometry_np(pts, h1, h2, rmax2, rmin2, ax, ay, az):
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    r2 = x * x + y * y + z * z
    keep = (z >= h1) & (z <= h2) & (r2 <= rmax2) & (r2 >= rmin2)
    if not keep.any():
        return 0, 0.0, 0.0
    r2 = r2[keep]
    uz2 = (ax * x[keep] + ay * y[keep] + az * z[keep]) ** 2 / r2
    f = uz2 * (1.0 - uz2) / (r2 * r2 * r2)
    return int(keep.sum()), float(np.sum(f)), float(np.sum(f * f))


def accumulate_geometry(pts, h1, h2, rmax2, rmin2, axis):
    """Count points inside the sample region and sum u_z^2 (1 - u_z^2) / r^6 and its square.

    ``pts`` are lab-frame positions relative to the NV (any consistent length
    unit); ``axis`` is the NV unit axis.
    """
    ax, ay, az = (float(a) for a in axis)
    fn = _accumulate_geometry_nb if USE_NUMBA else _accumulate_geometry_np
    n, s1, s2 = fn(np.ascontiguousarray(pts, dtype=np.float64), float(h1), float(h2),
                   float(rmax2), float(rmin2), ax, ay, az)
    return int(n), float(s1), float(s2)


# ---------------------------------------------------------------------------
# pseudospin product
# ---------------------------------------------------------------------------


@_njit
def _sin_ratio_sq_nb(n, y):
    # sin^2(n y) / sin^2(y), continuous at y = 0
    sy = math.sin(y)
    if abs(sy) < 1e-12:
        return float(n) * float(n)
    q = math.sin(n * y) / sy
    return q * q


@_njit
def _pseudospin_log_nb(avec, omega_l, taus, n_pulses, approx):
    out = np.zeros(taus.shape[0])
    sign = np.ones(taus.shape[0])
    for k in range(taus.shape[0]):
        tau = taus[k]
        acc = 0.0
        comp = 0.0
        neg = 0
        s0 = math.sin(omega_l * tau / 4.0) ** 2
        if approx:
            # 1 - S = (kappa^2 / 8) |g(omega_L)|^2, all-harmonic filter
            yl = 0.5 * math.pi - 0.5 * omega_l * tau
            m = math.floor(yl / math.pi + 0.5)
            yl = yl - m * math.pi
            g2 = 16.0 / (omega_l * omega_l) * s0 * s0 * _sin_ratio_sq_nb(n_pulses, yl)
        for j in range(avec.shape[0]):
            axj = avec[j, 0]
            ayj = avec[j, 1]
            azj = avec[j, 2]
            kap2 = axj * axj + ayj * ayj
            if kap2 == 0.0:
                continue
            if approx:
                dip = 0.125 * kap2 * g2
            else:
                wz = omega_l + azj
                om1 = math.sqrt(kap2 + wz * wz)
                n01 = wz / om1
                cross2 = kap2 / (om1 * om1)
                c = (math.cos(omega_l * tau / 2.0) * math.cos(om1 * tau / 2.0)
                     - n01 * math.sin(omega_l * tau / 2.0) * math.sin(om1 * tau / 2.0))
                if c > 1.0:
                    c = 1.0
                elif c < -1.0:
                    c = -1.0
                y = 0.5 * math.acos(-c)
                dip = 2.0 * cross2 * s0 * math.sin(om1 * tau / 4.0) ** 2 * _sin_ratio_sq_nb(n_pulses, y)
            if dip > 1.0:
                neg += 1
                v = math.log(dip - 1.0)
            else:
                v = math.log1p(-dip)
            t = acc + v
            if abs(acc) >= abs(v):
                comp += (acc - t) + v
            else:
                comp += (v - t) + acc
            acc = t
        out[k] = acc + comp
        if neg % 2:
            sign[k] = -1.0
    return out, sign


def _sin_ratio_sq_np(n, y):
    sy = np.sin(y)
    small = np.abs(sy) < 1e-12
    q = np.sin(n * y) / np.where(small, 1.0, sy)
    return np.where(small, float(n) ** 2, q * q)


def _log_abs_1m(dip):
    s = 1.0 - dip
    return np.log(np.abs(s)), int(np.count_nonzero(s < 0))


def _pseudospin_log_np(avec, omega_l, taus, n_pulses, approx, chunk=1 << 18):
    out = np.zeros(taus.shape[0])
    sign = np.ones(taus.shape[0])
    kap2_all = avec[:, 0] ** 2 + avec[:, 1] ** 2
    for k, tau in enumerate(taus):
        s0 = math.sin(omega_l * tau / 4.0) ** 2
        total = 0.0
        if approx:
            yl = 0.5 * math.pi - 0.5 * omega_l * tau
            yl -= math.floor(yl / math.pi + 0.5) * math.pi
            g2 = 16.0 / omega_l**2 * s0 * s0 * float(_sin_ratio_sq_np(n_pulses, np.array(yl)))
            v, neg = _log_abs_1m(0.125 * kap2_all * g2)
            out[k] = float(np.sum(v))
            sign[k] = -1.0 if neg % 2 else 1.0
            continue
        neg = 0
        for lo in range(0, avec.shape[0], chunk):
            kap2 = kap2_all[lo:lo + chunk]
            wz = omega_l + avec[lo:lo + chunk, 2]
            om1 = np.sqrt(kap2 + wz * wz)
            n01 = wz / om1
            cross2 = kap2 / (om1 * om1)
            c = (math.cos(omega_l * tau / 2.0) * np.cos(om1 * tau / 2.0)
                 - n01 * math.sin(omega_l * tau / 2.0) * np.sin(om1 * tau / 2.0))
            y = 0.5 * np.arccos(-np.clip(c, -1.0, 1.0))
            dip = 2.0 * cross2 * s0 * np.sin(om1 * tau / 4.0) ** 2 * _sin_ratio_sq_np(n_pulses, y)
            v, nneg = _log_abs_1m(dip)
            total += float(np.sum(v))
            neg += nneg
        out[k] = total
        sign[k] = -1.0 if neg % 2 else 1.0
    return out, sign


def pseudospin_log_signal(avec, omega_l, taus, n_pulses, approx=False):
    """Sum over spins of log|S_j| at each tau, and the sign of the product (even N)."""
    fn = _pseudospin_log_nb if USE_NUMBA else _pseudospin_log_np
    return fn(np.ascontiguousarray(avec, dtype=np.float64), float(omega_l),
              np.ascontiguousarray(taus, dtype=np.float64), int(n_pulses), bool(approx))


# explicit handles for benchmarks and cross-path tests
KERNELS = {
    "accumulate_geometry": (_accumulate_geometry_nb, _accumulate_geometry_np),
    "pseudospin_log": (_pseudospin_log_nb, _pseudospin_log_np),
}
