"""Time evolution of the particle cloud.

Two evolvers share the same self-consistent velocity law (every ring moves
with the field reconstructed from all rings):

* rk4      classical four-stage Runge-Kutta on the coupled ring system;
           the practical default.
* picard   successive approximation of the flow map: iterate n integrates
           against the velocity field frozen from iterate n-1 (linearly
           interpolated in time between stored nodes), starting from the
           identity map.  Contractive on windows with k*T1 <= 1/2, where
           k is the empirical Lipschitz constant of the field; used for
           cross-validation of rk4 and as the convergence monitor.

Transported fields g and vol are never touched: with_positions shares the
arrays, so their bit-identity across a run is structural.  Rings whose
radius goes negative inside a stage are clamped to the axis and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PicardConvergenceError
from .state import ParticleCloud
from .velocity import eval_grad_batch, eval_velocity_batch


@dataclass(frozen=True, eq=False)
class TrajectoryHistory:
    """Flow-map samples y(t_k, x_j): meridional positions and velocities per
    time node and ring, plus provenance and the axis-clamp event count."""

    times: np.ndarray  # (K+1,)
    r: np.ndarray  # (K+1, N)
    z: np.ndarray  # (K+1, N)
    vr: np.ndarray  # (K+1, N)
    vz: np.ndarray  # (K+1, N)
    provenance: str = "rk4"
    clamp_events: int = 0

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("history times must increase strictly")
        if np.any(self.r < 0):
            raise ValueError("history contains negative radii")

    @property
    def n_nodes(self) -> int:
        return self.times.shape[0]

    @property
    def n_rings(self) -> int:
        return self.r.shape[1]

    def cloud_at(self, k: int, base: ParticleCloud) -> ParticleCloud:
        return base.with_positions(self.r[k], self.z[k], t=self.times[k])

    def positions_at(self, t: float):
        """Linear-in-time interpolation of (r, z) between stored nodes."""
        ts = self.times
        if t <= ts[0]:
            return self.r[0], self.z[0]
        if t >= ts[-1]:
            return self.r[-1], self.z[-1]
        k = int(np.searchsorted(ts, t, side="right")) - 1
        lam = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (
            (1.0 - lam) * self.r[k] + lam * self.r[k + 1],
            (1.0 - lam) * self.z[k] + lam * self.z[k + 1],
        )

    def chain(self, other: "TrajectoryHistory") -> "TrajectoryHistory":
        if other.times[0] != self.times[-1]:
            raise ValueError("histories do not abut in time")
        return TrajectoryHistory(
            times=np.concatenate([self.times, other.times[1:]]),
            r=np.vstack([self.r, other.r[1:]]),
            z=np.vstack([self.z, other.z[1:]]),
            vr=np.vstack([self.vr, other.vr[1:]]),
            vz=np.vstack([self.vz, other.vz[1:]]),
            provenance=self.provenance if self.provenance == other.provenance else "mixed",
            clamp_events=self.clamp_events + other.clamp_events,
        )


@dataclass(frozen=True)
class PicardReport:
    window: float
    n_iterations: int
    g_history: tuple
    contraction_k: float

    @property
    def ratios(self) -> tuple:
        g = self.g_history
        return tuple(g[i + 1] / g[i] for i in range(len(g) - 1) if g[i] > 0.0)


@dataclass
class EvolveControls:
    evolver: str = "rk4"
    dt: float = 0.05  # rk4 step, or picard window length hint
    snapshot_every: int = 1  # steps (rk4) / windows (picard)
    picard_tol: float = 1e-10
    picard_max_iter: int = 30
    picard_nodes: int = 8
    cutoff: float | None = None
    pairwise: bool = False


@dataclass(frozen=True)
class AdvanceResult:
    cloud: ParticleCloud
    history: TrajectoryHistory
    picard_reports: tuple = ()
    clamp_events: int = 0


def _ring_velocity(cloud, cutoff=None, pairwise=False):
    """Meridional (dr/dt, dz/dt) of every ring, evaluated at the theta = 0
    material points from the cloud itself."""
    u = eval_velocity_batch(cloud.advection_points(), cloud, pairwise=pairwise, cutoff=cutoff)
    bad = ~np.all(np.isfinite(u), axis=1)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise FloatingPointError(f"non-finite advection velocity for ring {j}")
    return u[:, 0], u[:, 2]


def _checked(rr, zz, where):
    bad = ~(np.isfinite(rr) & np.isfinite(zz))
    if np.any(bad):
        j = int(np.argmax(bad))
        raise FloatingPointError(f"non-finite ring position at index {j} during {where}")
    return rr, zz


def _clamped(rr):
    neg = rr < 0.0
    n = int(np.count_nonzero(neg))
    if n:
        rr = np.where(neg, 0.0, rr)
    return rr, n


def _rk4_step(cloud: ParticleCloud, dt, cutoff=None, pairwise=False):
    """One RK4 step; returns (new cloud, start-of-step velocities, clamps)."""
    r0, z0 = cloud.r, cloud.z
    clamps = 0

    vr1, vz1 = _ring_velocity(cloud, cutoff, pairwise)

    r_s, n = _clamped(r0 + 0.5 * dt * vr1)
    clamps += n
    c2 = cloud.with_positions(r_s, z0 + 0.5 * dt * vz1)
    vr2, vz2 = _ring_velocity(c2, cutoff, pairwise)

    r_s, n = _clamped(r0 + 0.5 * dt * vr2)
    clamps += n
    c3 = cloud.with_positions(r_s, z0 + 0.5 * dt * vz2)
    vr3, vz3 = _ring_velocity(c3, cutoff, pairwise)

    r_s, n = _clamped(r0 + dt * vr3)
    clamps += n
    c4 = cloud.with_positions(r_s, z0 + dt * vz3)
    vr4, vz4 = _ring_velocity(c4, cutoff, pairwise)

    rr = r0 + (dt / 6.0) * (vr1 + 2.0 * vr2 + 2.0 * vr3 + vr4)
    zz = z0 + (dt / 6.0) * (vz1 + 2.0 * vz2 + 2.0 * vz3 + vz4)
    _checked(rr, zz, "rk4 step")
    rr, n = _clamped(rr)
    clamps += n
    return cloud.with_positions(rr, zz, t=cloud.t + dt), (vr1, vz1), clamps


def rk4_step(cloud: ParticleCloud, dt) -> ParticleCloud:
    """Classical RK4 on dx_j/dt = u(x_j; all rings); g, vol untouched.

    dt may be negative (used by time-reversal probes)."""
    if dt == 0.0 or not math.isfinite(dt):
        raise ValueError(f"dt must be a nonzero finite step, got {dt}")
    new, _, _ = _rk4_step(cloud, dt)
    return new


def estimate_contraction(cloud: ParticleCloud, cutoff=None) -> float:
    """Empirical Lipschitz constant of the reconstructed field: the largest
    operator norm of the velocity gradient over the ring points."""
    if cloud.n == 0:
        return 0.0
    grads = eval_grad_batch(cloud.advection_points(), cloud, cutoff=cutoff)
    return float(np.linalg.svd(grads, compute_uv=False)[:, 0].max())


def picard_solve(
    cloud: ParticleCloud,
    window: float,
    nodes: int = 8,
    tol: float = 1e-10,
    max_iter: int = 30,
    cutoff=None,
):
    """Successive flow-map approximation on [t, t + window].

    Iterate 0 is the frozen identity; iterate n integrates (RK4 over the
    stored nodes) against the field of iterate n-1, linearly interpolated
    in time, with the initial ring weights throughout.  Stops when the
    monitor g_n = sup_jk |y_n - y_(n-1)| drops below tol.

    Raises PicardConvergenceError (carrying the g sequence) at max_iter.
    """
    if window <= 0.0:
        raise ValueError("picard window must be positive")
    if nodes < 1:
        raise ValueError("picard needs at least one integration node")
    K = int(nodes)
    times = cloud.t + window * np.arange(K + 1) / K
    n = cloud.n
    # each ring's own theta = 0 node in the stale source set is the same
    # material point as the target; dropping it by index mirrors the
    # coincidence skip of the self-consistent path, so the converged field
    # equals the rk4 one and the monitor can contract to machine level
    own = np.zeros(n, dtype=np.int64)
    if n > 1:
        own[1:] = np.cumsum(cloud.n_theta[:-1])

    yr_prev = np.tile(cloud.r, (K + 1, 1))
    yz_prev = np.tile(cloud.z, (K + 1, 1))

    def field(t, rr, zz):
        lam_r, lam_z = _interp_rows(times, yr_prev, yz_prev, t)
        sources = cloud.with_positions(lam_r, lam_z)
        pts = np.zeros((n, 3))
        pts[:, 0] = rr
        pts[:, 2] = zz
        u = eval_velocity_batch(pts, sources, cutoff=cutoff, self_indices=own)
        return u[:, 0], u[:, 2]

    g_history = []
    clamps = 0
    for it in range(1, max_iter + 1):
        yr = np.empty_like(yr_prev)
        yz = np.empty_like(yz_prev)
        yr[0], yz[0] = cloud.r.copy(), cloud.z.copy()
        for k in range(K):
            h = times[k + 1] - times[k]
            t0 = times[k]
            rr, zz = yr[k], yz[k]
            vr1, vz1 = field(t0, rr, zz)
            r_s, c1 = _clamped(rr + 0.5 * h * vr1)
            vr2, vz2 = field(t0 + 0.5 * h, r_s, zz + 0.5 * h * vz1)
            r_s, c2 = _clamped(rr + 0.5 * h * vr2)
            vr3, vz3 = field(t0 + 0.5 * h, r_s, zz + 0.5 * h * vz2)
            r_s, c3 = _clamped(rr + h * vr3)
            vr4, vz4 = field(times[k + 1], r_s, zz + h * vz3)
            rn = rr + (h / 6.0) * (vr1 + 2 * vr2 + 2 * vr3 + vr4)
            zn = zz + (h / 6.0) * (vz1 + 2 * vz2 + 2 * vz3 + vz4)
            _checked(rn, zn, f"picard iterate {it}")
            rn, c4 = _clamped(rn)
            clamps += c1 + c2 + c3 + c4
            yr[k + 1], yz[k + 1] = rn, zn
        g = float(np.sqrt((yr - yr_prev) ** 2 + (yz - yz_prev) ** 2).max())
        g_history.append(g)
        yr_prev, yz_prev = yr, yz
        if g < tol:
            break
    else:
        raise PicardConvergenceError(
            f"no contraction below tol={tol} within {max_iter} iterations "
            f"(last monitor {g_history[-1]:.3e})",
            g_history,
        )

    # node velocities of the converged map, from its own positions
    vr = np.empty_like(yr_prev)
    vz = np.empty_like(yz_prev)
    for k in range(K + 1):
        vr[k], vz[k] = field(times[k], yr_prev[k], yz_prev[k])

    history = TrajectoryHistory(
        times=times, r=yr_prev, z=yz_prev, vr=vr, vz=vz,
        provenance="picard", clamp_events=clamps,
    )
    report = PicardReport(
        window=float(window),
        n_iterations=len(g_history),
        g_history=tuple(g_history),
        contraction_k=estimate_contraction(cloud, cutoff=cutoff),
    )
    return history, report


def _interp_rows(times, yr, yz, t):
    if t <= times[0]:
        return yr[0], yz[0]
    if t >= times[-1]:
        return yr[-1], yz[-1]
    k = int(np.searchsorted(times, t, side="right")) - 1
    lam = (t - times[k]) / (times[k + 1] - times[k])
    return (1.0 - lam) * yr[k] + lam * yr[k + 1], (1.0 - lam) * yz[k] + lam * yz[k + 1]


def advance(cloud: ParticleCloud, T: float, controls: EvolveControls, on_snapshot=None):
    """March the cloud to time t + T, chaining fixed RK4 steps or Picard
    windows; returns the final cloud plus the full trajectory history.

    on_snapshot(cloud) fires at the configured cadence plus start and end.
    """
    if T < 0.0 or not math.isfinite(T):
        raise ValueError(f"horizon T must be nonnegative and finite, got {T}")
    if T == 0.0:
        v0r, v0z = _ring_velocity(cloud, controls.cutoff, controls.pairwise)
        hist = TrajectoryHistory(
            times=np.array([cloud.t]),
            r=cloud.r.reshape(1, -1).copy(),
            z=cloud.z.reshape(1, -1).copy(),
            vr=v0r.reshape(1, -1),
            vz=v0z.reshape(1, -1),
            provenance=controls.evolver,
        )
        return AdvanceResult(cloud, hist)
    if controls.evolver == "rk4":
        return _advance_rk4(cloud, T, controls, on_snapshot)
    if controls.evolver == "picard":
        return _advance_picard(cloud, T, controls, on_snapshot)
    raise ValueError(f"unknown evolver {controls.evolver!r}")


def _advance_rk4(cloud, T, controls, on_snapshot):
    dt = controls.dt
    if dt <= 0:
        raise ValueError("rk4 requires dt > 0")
    n_full = int(math.floor(T / dt + 1e-12))
    rem = T - n_full * dt
    steps = [dt] * n_full
    if rem > 1e-12 * dt:
        steps.append(rem)
    K = len(steps)
    n = cloud.n
    times = np.empty(K + 1)
    rr = np.empty((K + 1, n))
    zz = np.empty((K + 1, n))
    vr = np.empty((K + 1, n))
    vz = np.empty((K + 1, n))
    times[0] = cloud.t
    rr[0], zz[0] = cloud.r, cloud.z
    clamps = 0
    t0 = cloud.t
    current = cloud
    if on_snapshot is not None:
        on_snapshot(current)
    for k, h in enumerate(steps):
        current, (v0r, v0z), c = _rk4_step(current, h, controls.cutoff, controls.pairwise)
        vr[k], vz[k] = v0r, v0z
        clamps += c
        times[k + 1] = t0 + T if k == K - 1 else times[k] + h
        rr[k + 1], zz[k + 1] = current.r, current.z
        if on_snapshot is not None and ((k + 1) % controls.snapshot_every == 0 or k == K - 1):
            if k == K - 1:
                current = current.with_positions(current.r, current.z, t=t0 + T)
            on_snapshot(current)
    current = current.with_positions(current.r, current.z, t=t0 + T)
    vr[K], vz[K] = _ring_velocity(current, controls.cutoff, controls.pairwise)
    hist = TrajectoryHistory(
        times=times, r=rr, z=zz, vr=vr, vz=vz, provenance="rk4", clamp_events=clamps
    )
    return AdvanceResult(current, hist, (), clamps)


def _advance_picard(cloud, T, controls, on_snapshot):
    t_end = cloud.t + T
    current = cloud
    hist = None
    reports = []
    if on_snapshot is not None:
        on_snapshot(current)
    windows_done = 0
    while current.t < t_end - 1e-12 * max(T, 1.0):
        k_emp = estimate_contraction(current, controls.cutoff)
        w = controls.dt
        if k_emp > 0.0:
            w = min(w, 0.5 / k_emp)
        w = min(w, t_end - current.t)
        h, rep = picard_solve(
            current,
            w,
            nodes=controls.picard_nodes,
            tol=controls.picard_tol,
            max_iter=controls.picard_max_iter,
            cutoff=controls.cutoff,
        )
        reports.append(rep)
        current = h.cloud_at(h.n_nodes - 1, current)
        hist = h if hist is None else hist.chain(h)
        windows_done += 1
        if on_snapshot is not None and windows_done % controls.snapshot_every == 0:
            on_snapshot(current)
    if on_snapshot is not None and windows_done % controls.snapshot_every != 0:
        on_snapshot(current)
    return AdvanceResult(current, hist, tuple(reports), hist.clamp_events)
