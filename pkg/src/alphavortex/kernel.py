"""Scalar special functions of the smoothed Biot-Savart law.

The velocity kernel of the alpha-regularized model is built from

    f(z)       = ((1+z)e^{-z} - 1) / (4 pi z^2)
    f_alpha(s) = f(s/alpha) / alpha^2
    G_alpha(s) = (1 - e^{-s/alpha}) / (4 pi s)

with f_alpha = G_alpha' (the radial derivative), so that the curl of the
Green-function convolution and the direct f_alpha sum agree exactly.

All functions are pure and deterministic; near z = 0 they switch to
truncated Taylor series (see _scalarmath for the branch layout).  The
suprema m0 = sup|f|, m1 = sup|z f|, mf1 = sup|f'| that enter the velocity
and Lipschitz bounds are never hard-coded: bound_scan() computes them and
certifies grid-refinement stability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _scalarmath as _sm
from .errors import DiagnosticError, KernelDomainError

FOUR_PI = _sm.FOUR_PI


@dataclass(frozen=True)
class AlphaParam:
    """Regularization length alpha > 0, fixed for a whole run."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0.0) or not math.isfinite(self.alpha):
            raise KernelDomainError(f"alpha must be a positive finite length, got {self.alpha}")

    def __float__(self):
        return self.alpha


def as_alpha(alpha) -> float:
    """Accept AlphaParam or a plain positive number."""
    a = float(alpha)
    if not (a > 0.0) or not math.isfinite(a):
        raise KernelDomainError(f"alpha must be a positive finite length, got {alpha!r}")
    return a


@dataclass(frozen=True)
class KernelConstants:
    """Certified suprema of the kernel profile over z in (0, inf).

    m0  = sup |f(z)|     (attained in the z -> 0 limit, value 1/(8 pi))
    m1  = sup |z f(z)|   (attained at a finite z around 1.79)
    mf1 = sup |f'(z)|    (attained in the z -> 0 limit, value 1/(12 pi))
    """

    m0: float
    m1: float
    mf1: float

    def __post_init__(self):
        for name in ("m0", "m1", "mf1"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise DiagnosticError(f"kernel constant {name} not finite/positive: {v}")


def _check_nonneg(z, what):
    if np.any(np.asarray(z) < 0):
        raise KernelDomainError(f"{what} requires a nonnegative argument")


def f_scalar(z):
    """f(z) for scalar or array z >= 0."""
    _check_nonneg(z, "f_scalar")
    if np.ndim(z) == 0:
        return _sm.f_raw(float(z))
    arr = np.asarray(z, dtype=float)
    out = np.empty(arr.shape)
    flat = arr.ravel()
    o = out.ravel()
    for i in range(flat.size):
        o[i] = _sm.f_raw(flat[i])
    return out


def f_prime(z):
    """f'(z) for scalar or array z >= 0."""
    _check_nonneg(z, "f_prime")
    if np.ndim(z) == 0:
        return _sm.f_prime_raw(float(z))
    arr = np.asarray(z, dtype=float)
    out = np.empty(arr.shape)
    flat = arr.ravel()
    o = out.ravel()
    for i in range(flat.size):
        o[i] = _sm.f_prime_raw(flat[i])
    return out


def f_alpha(s, alpha):
    """f_alpha(s) = f(s/alpha)/alpha^2; units 1/length^2."""
    a = as_alpha(alpha)
    _check_nonneg(s, "f_alpha")
    return f_scalar(np.asarray(s) / a if np.ndim(s) else float(s) / a) / (a * a)


def green_alpha(s, alpha):
    """G_alpha(s) = (1 - e^{-s/alpha})/(4 pi s), with G_alpha(0) = 1/(4 pi alpha)."""
    a = as_alpha(alpha)
    _check_nonneg(s, "green_alpha")
    if np.ndim(s) == 0:
        return _sm.green_scaled_raw(float(s) / a) / (FOUR_PI * a)
    arr = np.asarray(s, dtype=float)
    out = np.empty(arr.shape)
    flat = arr.ravel()
    o = out.ravel()
    for i in range(flat.size):
        o[i] = _sm.green_scaled_raw(flat[i] / a) / (FOUR_PI * a)
    return out


def _golden_max(fun, lo, hi, iters=200):
    """Golden-section maximization of a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if b - a < 1e-14 * max(1.0, abs(a)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    xm = 0.5 * (a + b)
    return xm, fun(xm)


def _scan_once(n_grid):
    """Suprema of |f|, |zf|, |f'| on a log grid over (0, 1e3], joined with
    the analytic z -> 0 limits; the interior max of |zf| is polished by
    golden-section search on the bracketing grid interval."""
    zs = np.logspace(-6.0, 3.0, n_grid)
    fv = np.abs(f_scalar(zs))
    zfv = np.abs(zs * f_scalar(zs))
    fpv = np.abs(f_prime(zs))

    # z -> 0 limits: f -> -1/(8 pi), z f -> 0, f' -> 1/(12 pi)
    lim_f = 1.0 / (8.0 * math.pi)
    lim_fp = 1.0 / (12.0 * math.pi)

    m0 = max(float(fv.max()), lim_f)
    mf1 = max(float(fpv.max()), lim_fp)

    i = int(np.argmax(zfv))
    lo = zs[max(i - 1, 0)]
    hi = zs[min(i + 1, n_grid - 1)]
    _, m1 = _golden_max(lambda z: abs(z * f_scalar(z)), lo, hi)
    m1 = max(float(m1), float(zfv.max()))
    return m0, m1, mf1, fv, fpv, lim_f, lim_fp


def bound_scan(n_grid=20001) -> KernelConstants:
    """Compute KernelConstants and certify them against 2x grid refinement.

    Raises DiagnosticError if refinement moves any constant by more than
    1e-6 relative, or if an interior grid value exceeds the claimed
    z -> 0 suprema of |f| or |f'| (both are expected to be attained in
    the limit; this is confirmed here, not assumed).
    """
    m0a, m1a, mf1a, fv, fpv, lim_f, lim_fp = _scan_once(n_grid)
    m0b, m1b, mf1b, _, _, _, _ = _scan_once(2 * n_grid - 1)
    for name, a, b in (("m0", m0a, m0b), ("m1", m1a, m1b), ("mf1", mf1a, mf1b)):
        if abs(a - b) > 1e-6 * abs(b):
            raise DiagnosticError(
                f"bound scan did not converge for {name}: {a!r} vs {b!r} at 2x refinement"
            )
    if fv.max() > lim_f or fpv.max() > lim_fp:
        raise DiagnosticError("interior kernel value exceeds the z->0 supremum; scan invalid")
    return KernelConstants(m0=m0b, m1=m1b, mf1=mf1b)
