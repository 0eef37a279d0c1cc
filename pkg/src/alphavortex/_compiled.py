"""numba-compiled direct-summation loops.

The scalar kernel functions are compiled from the exact same source as the
plain-Python API (_scalarmath), so both paths produce bitwise-identical
values.  Every batch loop parallelizes over evaluation points only; each
point's source sum runs sequentially in fixed node order, which makes the
thread count observationally invisible (bit-identical output for any
number of workers).

fastmath stays off everywhere: reassociation would break the fixed
summation order.
"""

import math
import os

import numpy as np

# The bundled TBB is too old for numba and triggers a warning when the
# parallel runtime starts; OpenMP behaves identically for our access
# pattern (per-point sequential sums), so prefer it outright.
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from numba import njit, prange

from . import _scalarmath as _sm

f_jit = njit(cache=True)(_sm.f_raw)
fp_jit = njit(cache=True)(_sm.f_prime_raw)

_Z_MID = _sm.Z_MID
_FOUR_PI = _sm.FOUR_PI

_PAIR_BLOCK = 1024


@njit(cache=True)
def f_and_fp_jit(z):
    # shares one exp between f and f'; math.exp matches CPython's libm
    # bitwise under numba, np.exp does not
    if z <= _Z_MID:
        return f_jit(z), fp_jit(z)
    e = math.exp(-z)
    fv = ((1.0 + z) * e - 1.0) / (_FOUR_PI * z * z)
    fpv = (2.0 - (2.0 + 2.0 * z + z * z) * e) / (_FOUR_PI * z * z * z)
    return fv, fpv


@njit(cache=True, parallel=True)
def velocity_batch(pts, nodes, node_w, inv_a, inv_a2, cutoff2, self_idx, out):
    """u(x) = sum_k w_k f_alpha(|x-y_k|) (x-y_k)/|x-y_k| x (y_k2, -y_k1, 0).

    Self-terms (coincident points) and beyond-cutoff terms contribute zero.
    """
    m = pts.shape[0]
    s_count = nodes.shape[0]
    for i in prange(m):
        px = pts[i, 0]
        py = pts[i, 1]
        pz = pts[i, 2]
        own = self_idx[i]
        ux = 0.0
        uy = 0.0
        uz = 0.0
        for k in range(s_count):
            if k == own:
                continue
            dx = px - nodes[k, 0]
            dy = py - nodes[k, 1]
            dz = pz - nodes[k, 2]
            s2 = dx * dx + dy * dy + dz * dz
            if s2 == 0.0 or s2 > cutoff2:
                continue
            s = np.sqrt(s2)
            coef = node_w[k] * f_jit(s * inv_a) * inv_a2 / s
            cx = nodes[k, 1]
            cy = -nodes[k, 0]
            ux += coef * (-dz * cy)
            uy += coef * (dz * cx)
            uz += coef * (dx * cy - dy * cx)
        out[i, 0] = ux
        out[i, 1] = uy
        out[i, 2] = uz


@njit(cache=True, parallel=True)
def velocity_batch_blocked(pts, nodes, node_w, inv_a, inv_a2, cutoff2, self_idx, out):
    """Same sum with two-level blocked accumulation (block 1024): round-off
    grows like sqrt of the term count instead of linearly.  Still a fixed,
    thread-count-independent order."""
    m = pts.shape[0]
    s_count = nodes.shape[0]
    for i in prange(m):
        px = pts[i, 0]
        py = pts[i, 1]
        pz = pts[i, 2]
        own = self_idx[i]
        tx = 0.0
        ty = 0.0
        tz = 0.0
        bx = 0.0
        by = 0.0
        bz = 0.0
        filled = 0
        for k in range(s_count):
            dx = px - nodes[k, 0]
            dy = py - nodes[k, 1]
            dz = pz - nodes[k, 2]
            s2 = dx * dx + dy * dy + dz * dz
            if not (k == own or s2 == 0.0 or s2 > cutoff2):
                s = np.sqrt(s2)
                coef = node_w[k] * f_jit(s * inv_a) * inv_a2 / s
                cx = nodes[k, 1]
                cy = -nodes[k, 0]
                bx += coef * (-dz * cy)
                by += coef * (dz * cx)
                bz += coef * (dx * cy - dy * cx)
            filled += 1
            if filled == _PAIR_BLOCK:
                tx += bx
                ty += by
                tz += bz
                bx = 0.0
                by = 0.0
                bz = 0.0
                filled = 0
        out[i, 0] = tx + bx
        out[i, 1] = ty + by
        out[i, 2] = tz + bz


@njit(cache=True, parallel=True)
def grad_batch(pts, nodes, node_w, inv_a, inv_a2, inv_a3, cutoff2, out):
    """Analytic gradient of velocity_batch, same nodes and order.

    Each summand is w * phi(s) (d x c) with phi = f_alpha/s, so
      d(summand)_i/dx_k = w [ phi'(s) d_k/s (d x c)_i + phi(s) (e_k x c)_i ]
    with phi' = f_alpha'/s - f_alpha/s^2.  The trace vanishes per summand.
    """
    m = pts.shape[0]
    s_count = nodes.shape[0]
    for i in prange(m):
        px = pts[i, 0]
        py = pts[i, 1]
        pz = pts[i, 2]
        g00 = 0.0
        g01 = 0.0
        g02 = 0.0
        g10 = 0.0
        g11 = 0.0
        g12 = 0.0
        g20 = 0.0
        g21 = 0.0
        g22 = 0.0
        for k in range(s_count):
            dx = px - nodes[k, 0]
            dy = py - nodes[k, 1]
            dz = pz - nodes[k, 2]
            s2 = dx * dx + dy * dy + dz * dz
            if s2 == 0.0 or s2 > cutoff2:
                continue
            s = np.sqrt(s2)
            fv, fpv = f_and_fp_jit(s * inv_a)
            fa = fv * inv_a2
            fap = fpv * inv_a3
            w = node_w[k]
            phi = fa / s
            dphi = (fap - phi) / s  # phi'(s) = f_alpha'/s - f_alpha/s^2
            cx = nodes[k, 1]
            cy = -nodes[k, 0]
            rx = -dz * cy
            ry = dz * cx
            rz = dx * cy - dy * cx
            a = w * dphi / s
            g00 += a * rx * dx
            g01 += a * rx * dy
            g02 += a * rx * dz
            g10 += a * ry * dx
            g11 += a * ry * dy
            g12 += a * ry * dz
            g20 += a * rz * dx
            g21 += a * rz * dy
            g22 += a * rz * dz
            b = w * phi
            # e_1 x c = (0,0,cy); e_2 x c = (0,0,-cx); e_3 x c = (-cy,cx,0)
            g20 += b * cy
            g21 += -b * cx
            g02 += -b * cy
            g12 += b * cx
        out[i, 0, 0] = g00
        out[i, 0, 1] = g01
        out[i, 0, 2] = g02
        out[i, 1, 0] = g10
        out[i, 1, 1] = g11
        out[i, 1, 2] = g12
        out[i, 2, 0] = g20
        out[i, 2, 1] = g21
        out[i, 2, 2] = g22


@njit(cache=True)
def chi_cutoff(s):
    """Smooth cutoff: 1 for s <= 1, 0 for s >= 2, C^inf in between."""
    if s <= 1.0:
        return 1.0
    if s >= 2.0:
        return 0.0
    x = 2.0 - s  # in (0, 1)
    a = np.exp(-1.0 / x)
    b = np.exp(-1.0 / (1.0 - x))
    return a / (a + b)


@njit(cache=True, parallel=True)
def grad_split_batch(pts, nodes, node_w, inv_a, inv_a2, inv_a3, out_far, out_near):
    """Gradient split into far (1 - chi) and near (chi) parts with the
    unit-width cutoff chi; far + near equals grad_batch up to round-off."""
    m = pts.shape[0]
    s_count = nodes.shape[0]
    for i in prange(m):
        px = pts[i, 0]
        py = pts[i, 1]
        pz = pts[i, 2]
        for a0 in range(3):
            for b0 in range(3):
                out_far[i, a0, b0] = 0.0
                out_near[i, a0, b0] = 0.0
        for k in range(s_count):
            dx = px - nodes[k, 0]
            dy = py - nodes[k, 1]
            dz = pz - nodes[k, 2]
            s2 = dx * dx + dy * dy + dz * dz
            if s2 == 0.0:
                continue
            s = np.sqrt(s2)
            fv, fpv = f_and_fp_jit(s * inv_a)
            fa = fv * inv_a2
            fap = fpv * inv_a3
            w = node_w[k]
            phi = fa / s
            dphi = (fap - phi) / s
            cx = nodes[k, 1]
            cy = -nodes[k, 0]
            rx = -dz * cy
            ry = dz * cx
            rz = dx * cy - dy * cx
            a = w * dphi / s
            b = w * phi
            ch = chi_cutoff(s)
            wf = 1.0 - ch
            out_far[i, 0, 0] += wf * a * rx * dx
            out_far[i, 0, 1] += wf * a * rx * dy
            out_far[i, 0, 2] += wf * (a * rx * dz - b * cy)
            out_far[i, 1, 0] += wf * a * ry * dx
            out_far[i, 1, 1] += wf * a * ry * dy
            out_far[i, 1, 2] += wf * (a * ry * dz + b * cx)
            out_far[i, 2, 0] += wf * (a * rz * dx + b * cy)
            out_far[i, 2, 1] += wf * (a * rz * dy - b * cx)
            out_far[i, 2, 2] += wf * a * rz * dz
            out_near[i, 0, 0] += ch * a * rx * dx
            out_near[i, 0, 1] += ch * a * rx * dy
            out_near[i, 0, 2] += ch * (a * rx * dz - b * cy)
            out_near[i, 1, 0] += ch * a * ry * dx
            out_near[i, 1, 1] += ch * a * ry * dy
            out_near[i, 1, 2] += ch * (a * ry * dz + b * cx)
            out_near[i, 2, 0] += ch * (a * rz * dx + b * cy)
            out_near[i, 2, 1] += ch * (a * rz * dy - b * cx)
            out_near[i, 2, 2] += ch * a * rz * dz
