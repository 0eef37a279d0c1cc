"""Quantitative verification layer: weak-form residuals on recorded
trajectories, the velocity-formulation residual, conservation and bound
monitors, and convergence-order estimation.

Everything here is a pure function of recorded histories and snapshots;
diagnostics never mutate simulation state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import DiagnosticError, GridCoverageError
from .kernel import KernelConstants
from .state import ParticleCloud, lp_norm
from .velocity import (
    eval_grad_batch,
    eval_hessian_batch,
    eval_velocity_batch,
    velocity_bound,
)

# ---------------------------------------------------------------------------
# smooth compactly supported test functions
#
# B(s) = exp(-1/(1-s)) on s < 1, else 0, with
#   B'   = -B / q^2
#   B''  =  B (1 - 2q) / q^4
#   B''' =  B (-1 + 6q - 6q^2) / q^6          (q = 1 - s)
# ---------------------------------------------------------------------------


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    m = s < 1.0
    out[m] = np.exp(-1.0 / (1.0 - s[m]))
    return out


def _bump_d1(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    m = s < 1.0
    q = 1.0 - s[m]
    out[m] = -np.exp(-1.0 / q) / q**2
    return out


def _bump_d2(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    m = s < 1.0
    q = 1.0 - s[m]
    out[m] = np.exp(-1.0 / q) * (1.0 - 2.0 * q) / q**4
    return out


def _bump_d3(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    m = s < 1.0
    q = 1.0 - s[m]
    out[m] = np.exp(-1.0 / q) * (-1.0 + 6.0 * q - 6.0 * q**2) / q**6
    return out


class TimeBump:
    """eta(t) supported strictly inside (a, b)."""

    def __init__(self, a, b):
        if not b > a:
            raise ValueError("need a < b")
        self.a, self.b = float(a), float(b)

    def value(self, t):
        tau = (2.0 * np.asarray(t, dtype=float) - self.a - self.b) / (self.b - self.a)
        return _bump(tau * tau)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        tau = (2.0 * t - self.a - self.b) / (self.b - self.a)
        return _bump_d1(tau * tau) * 2.0 * tau * 2.0 / (self.b - self.a)


class TimePlateau:
    """eta = 1 up to t1, smooth C^inf descent to 0 at t2 (exercises the
    initial-data pairing: eta(0) = 1)."""

    def __init__(self, t1, t2):
        if not t2 > t1:
            raise ValueError("need t1 < t2")
        self.t1, self.t2 = float(t1), float(t2)

    @staticmethod
    def _b1(x):
        out = np.zeros_like(x)
        m = x > 0.0
        out[m] = np.exp(-1.0 / x[m])
        return out

    @staticmethod
    def _b1d(x):
        out = np.zeros_like(x)
        m = x > 0.0
        out[m] = np.exp(-1.0 / x[m]) / x[m] ** 2
        return out

    def value(self, t):
        x = (self.t2 - np.asarray(t, dtype=float)) / (self.t2 - self.t1)
        x = np.clip(x, 0.0, 1.0)
        a, b = self._b1(x), self._b1(1.0 - x)
        return a / (a + b + (a + b == 0.0))

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        x = (self.t2 - t) / (self.t2 - self.t1)
        out = np.zeros_like(x)
        m = (x > 0.0) & (x < 1.0)
        xm = x[m]
        a, b = self._b1(xm), self._b1(1.0 - xm)
        da, db = self._b1d(xm), self._b1d(1.0 - xm)
        h = (da * b + a * db) / (a + b) ** 2
        out[m] = -h / (self.t2 - self.t1)
        return out


@dataclass(frozen=True)
class ScalarTestFunction:
    """phi(t, x) = eta(t) B(|x-c|^2/R^2); value, time derivative, gradient."""

    center: np.ndarray
    radius: float
    eta: object

    def _s(self, pts):
        d = np.asarray(pts, dtype=float) - self.center
        return np.sum(d * d, axis=-1) / self.radius**2, d

    def value(self, t, pts):
        s, _ = self._s(pts)
        return self.eta.value(t) * _bump(s)

    def dt(self, t, pts):
        s, _ = self._s(pts)
        return self.eta.deriv(t) * _bump(s)

    def grad(self, t, pts):
        s, d = self._s(pts)
        return (self.eta.value(t) * _bump_d1(s))[..., None] * (2.0 * d / self.radius**2)


def scalar_bump(center, radius, t_window) -> ScalarTestFunction:
    return ScalarTestFunction(
        center=np.asarray(center, dtype=float),
        radius=float(radius),
        eta=TimeBump(*t_window),
    )


@dataclass(frozen=True)
class DivFreeTestField:
    """phi = curl(psi e_x) with psi = eta(t) B(|x-c|^2/R^2): exactly
    divergence free, with analytic gradient and Laplacian.

    The horizontal potential direction matters: curl(psi e_z) pairs with
    omega_z only, which vanishes identically for axisymmetric swirl-free
    flow and would make every integral of the weak form trivially zero.
    """

    center: np.ndarray
    radius: float
    eta: object

    def _geom(self, pts):
        pts = np.asarray(pts, dtype=float)
        d = pts - self.center
        s = np.sum(d * d, axis=-1) / self.radius**2
        sk = 2.0 * d / self.radius**2  # gradient of s
        return s, sk

    def _spatial(self, pts):
        # curl(psi e_x) = (0, d_z psi, -d_y psi)
        s, sk = self._geom(pts)
        b1 = _bump_d1(s)
        out = np.zeros(s.shape + (3,))
        out[..., 1] = b1 * sk[..., 2]
        out[..., 2] = -b1 * sk[..., 1]
        return out

    def value(self, t, pts):
        return self.eta.value(t) * self._spatial(pts)

    def dt_value(self, t, pts):
        return self.eta.deriv(t) * self._spatial(pts)

    def grad(self, t, pts):
        """out[..., k, i] = d phi_k / d x_i."""
        s, sk = self._geom(pts)
        b1, b2 = _bump_d1(s), _bump_d2(s)
        two_r2 = 2.0 / self.radius**2
        g = np.zeros(s.shape + (3, 3))
        for i in range(3):
            g[..., 1, i] = b2 * sk[..., i] * sk[..., 2]
            g[..., 2, i] = -b2 * sk[..., i] * sk[..., 1]
        g[..., 1, 2] += b1 * two_r2
        g[..., 2, 1] -= b1 * two_r2
        return self.eta.value(t) * g

    def _laplacian_spatial(self, pts):
        s, sk = self._geom(pts)
        b2, b3 = _bump_d2(s), _bump_d3(s)
        core = (4.0 * s * b3 + 10.0 * b2) / self.radius**2
        out = np.zeros(s.shape + (3,))
        out[..., 1] = core * sk[..., 2]
        out[..., 2] = -core * sk[..., 1]
        return out

    def laplacian(self, t, pts):
        return self.eta.value(t) * self._laplacian_spatial(pts)

    def dt_laplacian(self, t, pts):
        return self.eta.deriv(t) * self._laplacian_spatial(pts)


def divfree_bump(center, radius, t_window=None, plateau=None) -> DivFreeTestField:
    if (t_window is None) == (plateau is None):
        raise ValueError("give exactly one of t_window or plateau")
    eta = TimeBump(*t_window) if t_window else TimePlateau(*plateau)
    return DivFreeTestField(center=np.asarray(center, dtype=float), radius=float(radius), eta=eta)


# ---------------------------------------------------------------------------
# weak-form residual along trajectories
# ---------------------------------------------------------------------------


def weak_form_residual(history, cloud0: ParticleCloud, phi: ScalarTestFunction) -> float:
    """Residual of the transported-scalar weak form, in Lagrangian shape.

    Along trajectories the advective derivative of phi is the plain total
    derivative, so the space-time integral collapses to

        sum_j w_j (1/n_j) sum_m  int  d/dt phi(t, y_jm(t)) dt

    which vanishes exactly for phi supported inside (t0, T).  The quadrature
    uses the stored node positions and velocities only (no kernel sums), so
    what remains is pure time-discretization error of the evolver.
    """
    if cloud0.n == 0 or not np.any(cloud0.weights):
        return 0.0
    times = history.times
    phi_t0 = phi.value(times[0], _ring_nodes(history, cloud0, 0))
    phi_t1 = phi.value(times[-1], _ring_nodes(history, cloud0, history.n_nodes - 1))
    if np.max(np.abs(phi_t0)) > 0.0 or np.max(np.abs(phi_t1)) > 0.0:
        raise ValueError("test function must vanish at the history endpoints")

    n_t = history.n_nodes
    contributions = np.zeros(n_t)
    per_ring = cloud0.weights / cloud0.n_theta
    for k in range(n_t):
        nodes, vels = _ring_nodes(history, cloud0, k, with_velocity=True)
        dphi = phi.dt(times[k], nodes) + np.sum(phi.grad(times[k], nodes) * vels, axis=-1)
        node_w = np.repeat(per_ring, cloud0.n_theta)
        contributions[k] = float(np.sum(node_w * dphi))
    total = simpson(contributions, x=times)
    return abs(float(total))


def _ring_nodes(history, cloud0, k, with_velocity=False):
    """Azimuthal material points (and node velocities) of every ring at
    history node k, ring-major node-minor."""
    nt = cloud0.n_theta
    parts = []
    vparts = []
    for j in range(cloud0.n):
        n = int(nt[j])
        theta = 2.0 * np.pi * np.arange(n) / n
        ct, st = np.cos(theta), np.sin(theta)
        r, z = history.r[k, j], history.z[k, j]
        parts.append(np.column_stack((r * ct, r * st, np.full(n, z))))
        if with_velocity:
            vr, vz = history.vr[k, j], history.vz[k, j]
            vparts.append(np.column_stack((vr * ct, vr * st, np.full(n, vz))))
    nodes = np.vstack(parts) if parts else np.zeros((0, 3))
    if not with_velocity:
        return nodes
    vels = np.vstack(vparts) if vparts else np.zeros((0, 3))
    return nodes, vels


# ---------------------------------------------------------------------------
# velocity-formulation residual
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VelocityFormResidual:
    dt_term: float
    transport_term: float
    hessian_term: float
    initial_term: float

    @property
    def total(self) -> float:
        return abs(self.dt_term + self.transport_term + self.hessian_term + self.initial_term)


def _gauss_points(box3, ncells, n_gauss):
    """Tensor-product Gauss-Legendre nodes/weights over a cubical cell grid."""
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    axes = []
    for lo, hi, nc in zip(box3[0::2], box3[1::2], ncells):
        edges = np.linspace(lo, hi, nc + 1)
        h = (hi - lo) / nc
        centers = 0.5 * (edges[:-1] + edges[1:])
        pts = (centers[:, None] + 0.5 * h * xg[None, :]).ravel()
        wts = np.tile(0.5 * h * wg, nc)
        axes.append((pts, wts))
    (px, wx), (py, wy), (pz, wz) = axes
    P = np.stack(np.meshgrid(px, py, pz, indexing="ij"), axis=-1).reshape(-1, 3)
    W = (wx[:, None, None] * wy[None, :, None] * wz[None, None, :]).ravel()
    return P, W


def weak_solution_residual(
    history,
    cloud0: ParticleCloud,
    field: DivFreeTestField,
    box3,
    ncells=(4, 4, 4),
    n_gauss=4,
) -> VelocityFormResidual:
    """Assemble the four integrals of the velocity weak form over the
    recorded run and return them (their sum converges to zero under
    simultaneous refinement of particles, time step, and quadrature).

    The test field must be divergence free; this is checked by sampling.
    """
    times = history.times
    alpha2 = cloud0.alpha**2
    P, W = _gauss_points(box3, ncells, n_gauss)

    probe = P[:: max(1, P.shape[0] // 32)]
    gsample = field.grad(times[0] + 0.25 * (times[-1] - times[0]), probe)
    div = np.abs(np.trace(gsample, axis1=-2, axis2=-1))
    scale = np.linalg.norm(gsample, axis=(-2, -1))
    if np.any(div > 1e-10 * np.maximum(scale, 1e-300) + 1e-14):
        raise ValueError("test field is not divergence free")

    n_t = times.shape[0]
    dt_int = np.zeros(n_t)
    tr_int = np.zeros(n_t)
    hs_int = np.zeros(n_t)
    for k in range(n_t):
        cloud = history.cloud_at(k, cloud0)
        t = times[k]
        u = eval_velocity_batch(P, cloud)
        hess = eval_hessian_batch(P, cloud)
        lap_u = np.trace(hess, axis1=2, axis2=3)

        dphi_dt = field.dt_value(t, P) - alpha2 * field.dt_laplacian(t, P)
        dt_int[k] = float(np.sum(W * np.sum(u * dphi_dt, axis=1)))

        gphi = field.grad(t, P)  # [m, k, i] = d phi_k / d x_i
        adv = np.einsum("mi,mki->mk", u, gphi)
        v_unfiltered = u - alpha2 * lap_u
        tr_int[k] = float(np.sum(W * np.sum(adv * v_unfiltered, axis=1)))

        # (grad phi : D^2) u . u = d_i phi_k  d_k d_i u_l  u_l
        hs = np.einsum("mki,mlik,ml->m", gphi, hess, u)
        hs_int[k] = alpha2 * float(np.sum(W * hs))

    u0 = eval_velocity_batch(P, cloud0.with_positions(history.r[0], history.z[0], t=times[0]))
    phi0 = field.value(times[0], P) - alpha2 * field.laplacian(times[0], P)
    initial = float(np.sum(W * np.sum(u0 * phi0, axis=1)))

    return VelocityFormResidual(
        dt_term=float(simpson(dt_int, x=times)),
        transport_term=float(simpson(tr_int, x=times)),
        hessian_term=float(simpson(hs_int, x=times)),
        initial_term=initial,
    )


# ---------------------------------------------------------------------------
# monitors
# ---------------------------------------------------------------------------


def energy_monitor(cloud: ParticleCloud, grid) -> float:
    """E = 1/2 integral (|u|^2 + alpha^2 |grad u|^2) dV over a meridional
    grid; a drift monitor, not an asserted conservation law.

    grid = (box2d, nr, nz) must cover the cloud support with margin 5 alpha.
    """
    box, nr, nz = grid
    rmin, rmax, zmin, zmax = (float(v) for v in box)
    if cloud.n == 0:
        return 0.0
    m = 5.0 * cloud.alpha
    req = (
        max(0.0, float(cloud.r.min()) - m),
        float(cloud.r.max()) + m,
        float(cloud.z.min()) - m,
        float(cloud.z.max()) + m,
    )
    if rmin > req[0] or rmax < req[1] or zmin > req[2] or zmax < req[3]:
        raise GridCoverageError(
            f"energy grid {box} lacks the 5-alpha margin; need at least {req}", req
        )
    dr = (rmax - rmin) / nr
    dz = (zmax - zmin) / nz
    rc = rmin + (np.arange(nr) + 0.5) * dr
    zc = zmin + (np.arange(nz) + 0.5) * dz
    rg, zg = np.meshgrid(rc, zc, indexing="ij")
    pts = np.zeros((rg.size, 3))
    pts[:, 0] = rg.ravel()
    pts[:, 2] = zg.ravel()
    u = eval_velocity_batch(pts, cloud)
    g = eval_grad_batch(pts, cloud)
    dens = np.sum(u * u, axis=1) + cloud.alpha**2 * np.sum(g * g, axis=(1, 2))
    cellvol = 2.0 * np.pi * pts[:, 0] * dr * dz
    return 0.5 * float(np.sum(dens * cellvol))


def errors_vs_finest(runs):
    """[(h, observable array)] -> [(h, scalar error vs the finest run)]."""
    runs = sorted(runs, key=lambda p: p[0])
    h_fine, ref = runs[0]
    out = []
    for h, obs in runs[1:]:
        out.append((h, float(np.max(np.abs(np.asarray(obs) - np.asarray(ref))))))
    return out


def order_estimate(runs) -> float:
    """Least-squares slope of log error against log h.

    Accepts (h, error) pairs directly, or (h, observable-array) pairs which
    are first reduced against the finest run.  Non-monotone errors warn but
    still report the slope.
    """
    runs = list(runs)
    if len(runs) < 3:
        raise DiagnosticError("order estimation needs at least 3 resolutions")
    if np.ndim(runs[0][1]) > 0:
        runs = errors_vs_finest(runs)
        if len(runs) < 2:
            raise DiagnosticError("too few runs after reducing against the finest")
    hs = np.array([h for h, _ in runs], dtype=float)
    errs = np.array([e for _, e in runs], dtype=float)
    if np.any(errs <= 0.0):
        raise DiagnosticError("errors must be positive for a log-log fit")
    order = np.argsort(hs)[::-1]
    if np.any(np.diff(errs[order]) > 0.0):
        warnings.warn("errors are not monotone in h; the slope may be unreliable")
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def lipschitz_probe(cloud: ParticleCloud, constants: KernelConstants, pairs):
    """Empirical |u(x) - u(x')|/|x - x'| against the assembled two-term
    bound: per source node, mean-value on f_alpha (sup |f'|/alpha^3) plus
    direction variation (2 sup |f|/(alpha^2 * distance to the segment)),
    each carrying the node's ring radius from the azimuthal factor."""
    nodes, nw = cloud.source_nodes
    src_r = np.hypot(nodes[:, 0], nodes[:, 1])
    a = cloud.alpha
    out = []
    for x, xp in pairs:
        x = np.asarray(x, dtype=float)
        xp = np.asarray(xp, dtype=float)
        u = eval_velocity_batch(np.vstack([x, xp]), cloud)
        gap = float(np.linalg.norm(x - xp))
        ratio = float(np.linalg.norm(u[0] - u[1])) / gap
        d = _point_segment_distance(nodes, x, xp)
        if np.any(d == 0.0):
            bound = math.inf
        else:
            bound = float(
                np.sum(
                    np.abs(nw)
                    * src_r
                    * (constants.mf1 / a**3 + 2.0 * constants.m0 / (a * a * d))
                )
            )
        out.append((ratio, bound))
    return out


def _point_segment_distance(pts, a, b):
    ab = b - a
    den = float(np.dot(ab, ab))
    if den == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    tt = np.clip((pts - a) @ ab / den, 0.0, 1.0)
    proj = a + tt[:, None] * ab
    return np.linalg.norm(pts - proj, axis=1)


# ---------------------------------------------------------------------------
# combined verification pass
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    value: float
    bound: float
    passed: bool

    def as_dict(self):
        return {
            "property": self.name,
            "value": self.value,
            "bound": self.bound,
            "pass": self.passed,
        }


def verify_suite(snapshots, constants: KernelConstants, seed=0, n_probes=64) -> list:
    """Machine-readable pass/fail over a time-ordered snapshot sequence:
    exact transport invariance, exact L^p conservation, divergence-free
    reconstruction, in-plane swirl, and the velocity bound."""
    if not snapshots:
        raise DiagnosticError("verify needs at least one snapshot")
    first, last = snapshots[0], snapshots[-1]
    checks = []

    dev_g = max(float(np.max(np.abs(c.g - first.g))) if c.n else 0.0 for c in snapshots)
    dev_vol = max(float(np.max(np.abs(c.vol - first.vol))) if c.n else 0.0 for c in snapshots)
    checks.append(PropertyCheck("transport_g_bit_identical", dev_g, 0.0, dev_g == 0.0))
    checks.append(PropertyCheck("transport_vol_bit_identical", dev_vol, 0.0, dev_vol == 0.0))

    for p, tag in ((1.0, "l1"), (2.0, "l2"), (math.inf, "linf")):
        if first.n == 0:
            checks.append(PropertyCheck(f"{tag}_conserved", 0.0, 0.0, True))
            continue
        base = lp_norm(first, p)
        dev = max(abs(lp_norm(c, p) - base) for c in snapshots)
        checks.append(PropertyCheck(f"{tag}_conserved", dev, 0.0, dev == 0.0))

    if last.n:
        rng = np.random.default_rng(seed)
        m = 2.0 * last.alpha
        lo = np.array([0.0, -float(last.r.max()) - m, float(last.z.min()) - m])
        hi = np.array(
            [float(last.r.max()) + m, float(last.r.max()) + m, float(last.z.max()) + m]
        )
        pts = rng.uniform(lo, hi, size=(n_probes, 3))

        grads = eval_grad_batch(pts, last)
        tr = np.abs(np.trace(grads, axis1=1, axis2=2))
        nrm = np.maximum(np.linalg.norm(grads, axis=(1, 2)), 1e-300)
        div_ratio = float(np.max(tr / nrm))
        checks.append(PropertyCheck("divergence_free", div_ratio, 1e-10, div_ratio <= 1e-10))

        plane = pts.copy()
        plane[:, 0] = np.hypot(pts[:, 0], pts[:, 1]) + 0.05
        plane[:, 1] = 0.0
        u = eval_velocity_batch(plane, last)
        swirl = np.abs(u[:, 1])
        speed = np.maximum(np.linalg.norm(u, axis=1), 1e-300)
        swirl_ratio = float(np.max(swirl / speed))
        checks.append(PropertyCheck("swirl_free_inplane", swirl_ratio, 1e-8, swirl_ratio <= 1e-8))

        speeds = np.linalg.norm(eval_velocity_batch(pts, last), axis=1)
        bounds = velocity_bound(pts, last, constants)
        ratio = float(np.max(speeds / bounds))
        checks.append(PropertyCheck("velocity_bound", ratio, 1.0, ratio <= 1.0))
    return checks
