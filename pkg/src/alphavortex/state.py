"""Discrete flow state: vortex rings carrying transported potential-vorticity
samples, immutable particle clouds, and signed Dirac-ring measure data.

A ring j is the circle {(r_j cos t, r_j sin t, z_j)} carrying the sample
g_j of the transported scalar (azimuthal unfiltered vorticity divided by
cylindrical radius) and its meridional cell volume vol_j = 2 pi r dr dz.
Both g_j and vol_j are constant along trajectories; evolvers only ever
move (r_j, z_j).  All L^p norms of g are therefore conserved exactly by
construction, and the cloud exposes them via lp_norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import SupportError
from .kernel import as_alpha


@dataclass(frozen=True)
class VortexRing:
    r: float
    z: float
    g: float
    vol: float
    n_theta: int = 16

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"ring radius must be >= 0, got {self.r}")
        if self.n_theta < 4 or self.n_theta % 2:
            raise ValueError(f"n_theta must be even and >= 4, got {self.n_theta}")


def sample_points(ring: VortexRing) -> np.ndarray:
    """Azimuthal quadrature nodes (n_theta, 3) of a ring, theta_m = 2 pi m/n."""
    m = np.arange(ring.n_theta)
    theta = 2.0 * np.pi * m / ring.n_theta
    return np.column_stack(
        (ring.r * np.cos(theta), ring.r * np.sin(theta), np.full(ring.n_theta, ring.z))
    )


def _frozen(arr, dtype=float):
    out = np.ascontiguousarray(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    """Immutable discrete state; evolvers produce new clouds via
    with_positions, sharing the g/vol/n_theta arrays bit-for-bit."""

    r: np.ndarray
    z: np.ndarray
    g: np.ndarray
    vol: np.ndarray
    n_theta: np.ndarray
    alpha: float
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_alpha(self.alpha))
        for name in ("r", "z", "g", "vol"):
            a = getattr(self, name)
            if not (isinstance(a, np.ndarray) and a.dtype == np.float64 and not a.flags.writeable):
                object.__setattr__(self, name, _frozen(a))
        nt = self.n_theta
        if not (isinstance(nt, np.ndarray) and nt.dtype == np.int64 and not nt.flags.writeable):
            object.__setattr__(self, "n_theta", _frozen(nt, dtype=np.int64))
        n = self.r.shape[0]
        for name in ("z", "g", "vol", "n_theta"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"field {name} has shape {getattr(self, name).shape}, expected ({n},)")
        if n:
            if not np.all(np.isfinite(self.r)) or not np.all(np.isfinite(self.z)):
                raise ValueError("non-finite ring position")
            if self.r.min() < 0:
                raise ValueError("ring radius must be >= 0")
            if not np.all(self.vol > 0):
                raise ValueError("cell volumes must be positive")
            if np.any(self.n_theta < 4) or np.any(self.n_theta % 2):
                raise ValueError("n_theta must be even and >= 4")

    @classmethod
    def from_rings(cls, rings, alpha, t=0.0) -> "ParticleCloud":
        """Build from VortexRing objects; zero-volume rings (r = 0 cells)
        carry no vorticity and are dropped."""
        kept = [rg for rg in rings if rg.vol != 0.0]
        return cls(
            r=np.array([rg.r for rg in kept]),
            z=np.array([rg.z for rg in kept]),
            g=np.array([rg.g for rg in kept]),
            vol=np.array([rg.vol for rg in kept]),
            n_theta=np.array([rg.n_theta for rg in kept], dtype=np.int64),
            alpha=alpha,
            t=t,
        )

    @property
    def n(self) -> int:
        return self.r.shape[0]

    def rings(self):
        for j in range(self.n):
            yield VortexRing(
                r=float(self.r[j]),
                z=float(self.z[j]),
                g=float(self.g[j]),
                vol=float(self.vol[j]),
                n_theta=int(self.n_theta[j]),
            )

    @property
    def weights(self) -> np.ndarray:
        """Ring weights w_j = g_j vol_j (the transported masses)."""
        return self.g * self.vol

    def with_positions(self, r, z, t=None) -> "ParticleCloud":
        return replace(
            self,
            r=_frozen(r),
            z=_frozen(z),
            t=self.t if t is None else float(t),
        )

    @cached_property
    def source_nodes(self):
        """(nodes (S,3), node_weights (S,)) in ring-major node-minor order;
        node weight is w_j / n_theta_j.  Cached per cloud instance."""
        if self.n == 0:
            return np.zeros((0, 3)), np.zeros(0)
        nt = self.n_theta
        w = self.weights
        if np.all(nt == nt[0]):
            nth = int(nt[0])
            theta = 2.0 * np.pi * np.arange(nth) / nth
            ct, st = np.cos(theta), np.sin(theta)
            nodes = np.empty((self.n, nth, 3))
            nodes[:, :, 0] = self.r[:, None] * ct[None, :]
            nodes[:, :, 1] = self.r[:, None] * st[None, :]
            nodes[:, :, 2] = self.z[:, None]
            nw = np.repeat(w / nth, nth)
            return np.ascontiguousarray(nodes.reshape(-1, 3)), nw
        parts = []
        wparts = []
        for j in range(self.n):
            nth = int(nt[j])
            theta = 2.0 * np.pi * np.arange(nth) / nth
            parts.append(
                np.column_stack(
                    (self.r[j] * np.cos(theta), self.r[j] * np.sin(theta), np.full(nth, self.z[j]))
                )
            )
            wparts.append(np.full(nth, w[j] / nth))
        return np.ascontiguousarray(np.vstack(parts)), np.concatenate(wparts)

    def advection_points(self) -> np.ndarray:
        """(N,3) representative material points, one per ring at theta = 0.
        Coincides bitwise with each ring's m = 0 quadrature node, so the
        self-term skip engages exactly."""
        out = np.zeros((self.n, 3))
        out[:, 0] = self.r
        out[:, 2] = self.z
        return out


def lp_norm(cloud: ParticleCloud, p) -> float:
    """Discrete L^p norm (sum |g|^p vol)^(1/p); p = inf gives max |g|.

    Conserved exactly in time because g and vol are stored, not recomputed.
    """
    if cloud.n == 0:
        raise ValueError("lp_norm of an empty cloud")
    if p == math.inf or p == "inf":
        return float(np.max(np.abs(cloud.g)))
    p = float(p)
    if p < 1.0:
        raise ValueError(f"lp_norm requires p >= 1, got {p}")
    return float(np.sum(np.abs(cloud.g) ** p * cloud.vol) ** (1.0 / p))


def init_from_profile(profile, box, nr, nz, n_theta, alpha, t=0.0) -> ParticleCloud:
    """Sample an analytic meridional profile g(r, z) onto cell-centered rings.

    box = (rmin, rmax, zmin, zmax) with rmin >= 0.  One ring per cell at
    the cell center, g_j = profile(r_j, z_j), vol_j = 2 pi r_j dr dz;
    rings with zero weight are dropped.  The profile must be numpy-
    vectorized and evaluable slightly outside the box: support is checked
    on a half-width margin band and any mass out there raises SupportError
    with the overflow fraction.
    """
    rmin, rmax, zmin, zmax = (float(v) for v in box)
    if not (0.0 <= rmin < rmax and zmin < zmax):
        raise ValueError(f"invalid meridional box {box}")
    nr, nz = int(nr), int(nz)
    if nr < 1 or nz < 1:
        raise ValueError("nr and nz must be >= 1")

    dr = (rmax - rmin) / nr
    dz = (zmax - zmin) / nz

    def cell_mass(r0, r1, z0, z1, mr, mz):
        rc = r0 + (np.arange(mr) + 0.5) * dr
        zc = z0 + (np.arange(mz) + 0.5) * dz
        rg, zg = np.meshgrid(rc, zc, indexing="ij")
        gv = np.asarray(profile(rg, zg), dtype=float)
        return rg, zg, gv, np.abs(gv) * 2.0 * np.pi * rg * dr * dz

    rg, zg, gv, absmass = cell_mass(rmin, rmax, zmin, zmax, nr, nz)
    inside = float(absmass.sum())

    # margin band: half a box width on each side (r clipped at the axis)
    mr_lo = min(nr // 2, int(math.floor(rmin / dr))) if rmin > 0 else 0
    mr_hi = nr // 2
    mz_pad = nz // 2
    ext_r0 = rmin - mr_lo * dr
    ext_z0 = zmin - mz_pad * dz
    _, _, _, ext_absmass = cell_mass(
        ext_r0, rmax + mr_hi * dr, ext_z0, zmax + mz_pad * dz, nr + mr_lo + mr_hi, nz + 2 * mz_pad
    )
    outside = float(ext_absmass.sum()) - inside
    if outside > 1e-12 * max(inside, 1e-300):
        frac = outside / (outside + inside) if (outside + inside) > 0 else 1.0
        raise SupportError(
            f"profile support exceeds the box: overflow fraction {frac:.3e}", frac
        )

    vol = 2.0 * np.pi * rg * dr * dz
    w = gv * vol
    keep = w != 0.0
    return ParticleCloud(
        r=rg[keep],
        z=zg[keep],
        g=gv[keep],
        vol=vol[keep],
        n_theta=np.full(int(keep.sum()), int(n_theta), dtype=np.int64),
        alpha=alpha,
        t=t,
    )


@dataclass(frozen=True, eq=False)
class MeasureData:
    """Finite signed combination of Dirac rings: atoms (r_i, z_i, mass m_i),
    masses measured as integrals of the potential vorticity, so the total
    variation sum |m_i| is the measure norm of the datum."""

    r: np.ndarray
    z: np.ndarray
    m: np.ndarray
    box: tuple = None

    def __post_init__(self):
        for name in ("r", "z", "m"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (self.r.shape == self.z.shape == self.m.shape):
            raise ValueError("atom arrays must have matching shapes")
        if self.r.size and self.r.min() < 0:
            raise ValueError("atom radius must be >= 0")
        if self.box is None and self.r.size:
            pad_r = 0.5 * max(float(self.r.max()), 1.0)
            pad_z = pad_r
            object.__setattr__(
                self,
                "box",
                (
                    max(0.0, float(self.r.min()) - pad_r),
                    float(self.r.max()) + pad_r,
                    float(self.z.min()) - pad_z,
                    float(self.z.max()) + pad_z,
                ),
            )
        if self.box is not None:
            rmin, rmax, zmin, zmax = self.box
            ok = np.all((self.r >= rmin) & (self.r <= rmax) & (self.z >= zmin) & (self.z <= zmax))
            if not ok:
                raise ValueError("atoms outside the declared bounding box")

    @classmethod
    def from_atoms(cls, atoms, box=None) -> "MeasureData":
        arr = np.asarray(atoms, dtype=float).reshape(-1, 3)
        return cls(r=arr[:, 0], z=arr[:, 1], m=arr[:, 2], box=box)

    @property
    def total_variation(self) -> float:
        return float(np.sum(np.abs(self.m)))


def gaussian_ring_profile(amplitude=1.0, ring_radius=1.0, core_width=0.1):
    """g(r, z) = A exp(-((r-R)^2 + z^2)/sigma^2)."""
    A, R, s2 = float(amplitude), float(ring_radius), float(core_width) ** 2

    def profile(r, z):
        return A * np.exp(-(((r - R) ** 2) + z**2) / s2)

    return profile


def gaussian_ring_pair_profile(amplitude=1.0, ring_radius=1.0, core_width=0.1, z_offset=0.25):
    """Two same-sign Gaussian cores at z = +/- z_offset (leapfrog seed)."""
    one = gaussian_ring_profile(amplitude, ring_radius, core_width)

    def profile(r, z):
        return one(r, z - z_offset) + one(r, z + z_offset)

    return profile


PROFILES = {
    "gaussian_ring": gaussian_ring_profile,
    "gaussian_ring_pair": gaussian_ring_pair_profile,
}
