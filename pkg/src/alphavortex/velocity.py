"""Velocity reconstruction by direct summation of the smoothed Biot-Savart
law over ring quadrature nodes, with analytic gradients.

Contracts that the rest of the code relies on:

* summation runs in fixed ring-major node-minor order; evaluation points
  are independent, so multi-threaded batches are bit-identical to the
  single-threaded ones;
* self-terms (evaluation point coinciding with a source node) contribute
  zero, the principal-value-consistent choice for the odd direction
  factor (x-y)/|x-y|;
* each velocity summand is an exact curl in x, so the analytic gradient
  has zero trace summand by summand and the assembled trace is pure
  round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _compiled
from .errors import BoundViolationError
from .kernel import KernelConstants
from .state import ParticleCloud


def _check_finite_points(pts):
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite evaluation point")


def _check_finite_cloud(cloud):
    for name in ("r", "z", "g", "vol"):
        if not np.all(np.isfinite(getattr(cloud, name))):
            raise ValueError(f"non-finite cloud field {name}")


def _as_points(points):
    pts = np.ascontiguousarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must have shape (m, 3), got {pts.shape}")
    return pts


_NO_SELF = np.full(1, -1, dtype=np.int64)


def eval_velocity_batch(
    points, cloud: ParticleCloud, pairwise=False, cutoff=None, self_indices=None
) -> np.ndarray:
    """u at each point, (m, 3).  Empty cloud gives zeros.

    pairwise switches to two-level blocked accumulation (same fixed order,
    lower round-off); cutoff (a radius) truncates interactions beyond it;
    self_indices[i] names one source node to drop for point i (the fixed-
    point solver excludes each ring's own theta = 0 node against the stale
    iterate, mirroring the coincidence skip of the self-consistent path).
    """
    pts = _as_points(points)
    _check_finite_points(pts)
    _check_finite_cloud(cloud)
    out = np.zeros((pts.shape[0], 3))
    if cloud.n == 0 or pts.shape[0] == 0:
        return out
    nodes, nw = cloud.source_nodes
    a = cloud.alpha
    cut2 = math.inf if cutoff is None else float(cutoff) ** 2
    if self_indices is None:
        self_idx = np.full(pts.shape[0], -1, dtype=np.int64)
    else:
        self_idx = np.ascontiguousarray(self_indices, dtype=np.int64)
        if self_idx.shape != (pts.shape[0],):
            raise ValueError("self_indices must have one entry per point")
    kern = _compiled.velocity_batch_blocked if pairwise else _compiled.velocity_batch
    kern(pts, nodes, nw, 1.0 / a, 1.0 / (a * a), cut2, self_idx, out)
    return out


def eval_velocity(x, cloud: ParticleCloud, pairwise=False, cutoff=None) -> np.ndarray:
    """u at a single point; bit-identical to the batch entry for that point."""
    return eval_velocity_batch(np.asarray(x, dtype=float).reshape(1, 3), cloud, pairwise, cutoff)[0]


def eval_grad_batch(points, cloud: ParticleCloud, cutoff=None) -> np.ndarray:
    """Velocity gradient du_i/dx_k at each point, (m, 3, 3), analytic."""
    pts = _as_points(points)
    _check_finite_points(pts)
    _check_finite_cloud(cloud)
    out = np.zeros((pts.shape[0], 3, 3))
    if cloud.n == 0 or pts.shape[0] == 0:
        return out
    nodes, nw = cloud.source_nodes
    a = cloud.alpha
    cut2 = math.inf if cutoff is None else float(cutoff) ** 2
    _compiled.grad_batch(pts, nodes, nw, 1.0 / a, 1.0 / (a * a), 1.0 / (a * a * a), cut2, out)
    return out


def eval_grad(x, cloud: ParticleCloud) -> np.ndarray:
    return eval_grad_batch(np.asarray(x, dtype=float).reshape(1, 3), cloud)[0]


def eval_grad_split_batch(points, cloud: ParticleCloud):
    """(far, near) gradient parts under the unit-width smooth cutoff
    (cut starts at distance 1, ends at 2); far + near = eval_grad_batch."""
    pts = _as_points(points)
    _check_finite_points(pts)
    _check_finite_cloud(cloud)
    far = np.zeros((pts.shape[0], 3, 3))
    near = np.zeros((pts.shape[0], 3, 3))
    if cloud.n == 0 or pts.shape[0] == 0:
        return far, near
    nodes, nw = cloud.source_nodes
    a = cloud.alpha
    _compiled.grad_split_batch(
        pts, nodes, nw, 1.0 / a, 1.0 / (a * a), 1.0 / (a * a * a), far, near
    )
    return far, near


def eval_hessian_batch(points, cloud: ParticleCloud, step=None) -> np.ndarray:
    """Second derivatives by central differences of the analytic gradient.

    out[m, l, i, k] = d^2 u_l / dx_i dx_k, with step h = 1e-4 alpha.
    """
    pts = _as_points(points)
    h = 1e-4 * cloud.alpha if step is None else float(step)
    out = np.zeros((pts.shape[0], 3, 3, 3))
    if cloud.n == 0 or pts.shape[0] == 0:
        return out
    for k in range(3):
        dp = np.zeros(3)
        dp[k] = h
        gp = eval_grad_batch(pts + dp, cloud)
        gm = eval_grad_batch(pts - dp, cloud)
        out[:, :, :, k] = (gp - gm) / (2.0 * h)
    # out[m, l, i, k] = d_k (d_i u_l); (i, k) symmetry holds to FD accuracy
    # and is left unsymmetrized so tests can measure it.
    return out


def eval_hessian(x, cloud: ParticleCloud, step=None) -> np.ndarray:
    return eval_hessian_batch(np.asarray(x, dtype=float).reshape(1, 3), cloud, step)[0]


def laplacian_batch(points, cloud: ParticleCloud, step=None) -> np.ndarray:
    """Delta u at each point, (m, 3): trace of the Hessian over (i, k)."""
    hess = eval_hessian_batch(points, cloud, step)
    return np.trace(hess, axis1=2, axis2=3)


def swirl_component(x, cloud: ParticleCloud) -> float:
    """u . e_theta with e_theta = (x2/r, -x1/r, 0); zero for axisymmetric
    clouds up to azimuthal quadrature error."""
    x = np.asarray(x, dtype=float).reshape(3)
    rho = math.hypot(x[0], x[1])
    if rho == 0.0:
        raise ValueError("swirl_component undefined on the z-axis (r = 0)")
    u = eval_velocity(x, cloud)
    return float((u[0] * x[1] - u[1] * x[0]) / rho)


@dataclass(frozen=True)
class VelocitySample:
    u: np.ndarray
    grad: np.ndarray = None
    hess: np.ndarray = None


def sample(x, cloud: ParticleCloud, want_grad=False, want_hess=False) -> VelocitySample:
    x = np.asarray(x, dtype=float).reshape(3)
    return VelocitySample(
        u=eval_velocity(x, cloud),
        grad=eval_grad(x, cloud) if want_grad else None,
        hess=eval_hessian(x, cloud) if want_hess else None,
    )


@dataclass(frozen=True)
class BoundReport:
    max_ratio: float
    worst_point: tuple
    n_points: int
    l1_weight: float


def velocity_bound(points, cloud: ParticleCloud, constants: KernelConstants) -> np.ndarray:
    """Pointwise bound on |u| from the two-term kernel split.

    Splitting the ring factor (y2, -y1, 0) = (y2-x2, x1-y1, 0) + (x2, -x1, 0)
    bounds each summand by |w| (|d| f_alpha(|d|) + f_alpha(|d|) r(x)) and
    hence, with sup |z f| = m1 and sup |f| = m0,

        |u(x)| <= (m1/alpha + m0 r(x)/alpha^2) sum_j |w_j|.
    """
    pts = _as_points(points)
    a = cloud.alpha
    l1 = float(np.sum(np.abs(cloud.weights)))
    r_perp = np.hypot(pts[:, 0], pts[:, 1])
    return (constants.m1 / a + constants.m0 * r_perp / (a * a)) * l1


def velocity_bound_check(cloud: ParticleCloud, points, constants: KernelConstants) -> BoundReport:
    """Assert |u| <= the assembled bound at every point; raises
    BoundViolationError naming the worst point on failure."""
    pts = _as_points(points)
    if cloud.n == 0 or pts.shape[0] == 0:
        return BoundReport(0.0, None, pts.shape[0], 0.0)
    u = eval_velocity_batch(pts, cloud)
    speed = np.linalg.norm(u, axis=1)
    bound = velocity_bound(pts, cloud, constants)
    ratio = speed / bound
    i = int(np.argmax(ratio))
    report = BoundReport(
        max_ratio=float(ratio[i]),
        worst_point=tuple(pts[i]),
        n_points=pts.shape[0],
        l1_weight=float(np.sum(np.abs(cloud.weights))),
    )
    if ratio[i] > 1.0:
        raise BoundViolationError(
            f"velocity bound violated at {tuple(pts[i])}: |u| = {speed[i]:.6e} "
            f"> bound {bound[i]:.6e}",
            worst_point=tuple(pts[i]),
            value=float(speed[i]),
            bound=float(bound[i]),
        )
    return report
