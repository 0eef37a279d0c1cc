import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad

from alphavortex.errors import SupportError
from alphavortex.state import (
    MeasureData,
    ParticleCloud,
    VortexRing,
    gaussian_ring_profile,
    init_from_profile,
    lp_norm,
    sample_points,
)

from conftest import gaussian_cloud, single_ring_cloud


class TestVortexRing:
    def test_rejects_negative_radius(self):
        with pytest.raises(ValueError):
            VortexRing(r=-0.1, z=0.0, g=1.0, vol=1.0)

    def test_rejects_odd_or_small_n_theta(self):
        with pytest.raises(ValueError):
            VortexRing(r=1.0, z=0.0, g=1.0, vol=1.0, n_theta=7)
        with pytest.raises(ValueError):
            VortexRing(r=1.0, z=0.0, g=1.0, vol=1.0, n_theta=2)


class TestSamplePoints:
    def test_axis_ring_collapses(self):
        pts = sample_points(VortexRing(r=0.0, z=0.7, g=1.0, vol=1.0, n_theta=8))
        assert np.allclose(pts, [0.0, 0.0, 0.7])

    def test_four_points(self):
        pts = sample_points(VortexRing(r=1.0, z=0.0, g=1.0, vol=1.0, n_theta=4))
        expected = np.array([[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]], dtype=float)
        assert np.allclose(pts, expected, atol=1e-15)

    def test_centroid_on_axis(self):
        for n in (4, 6, 16, 32):
            pts = sample_points(VortexRing(r=2.3, z=-0.4, g=1.0, vol=1.0, n_theta=n))
            c = pts.mean(axis=0)
            assert abs(c[0]) < 1e-14 and abs(c[1]) < 1e-14
            assert c[2] == pytest.approx(-0.4)

    @given(st.integers(min_value=2, max_value=16))
    @settings(max_examples=30, deadline=None)
    def test_rotation_by_node_angle_permutes(self, half_n):
        n = 2 * half_n
        pts = sample_points(VortexRing(r=1.5, z=0.2, g=1.0, vol=1.0, n_theta=n))
        a = 2.0 * math.pi / n
        rot = np.array(
            [[math.cos(a), -math.sin(a), 0.0], [math.sin(a), math.cos(a), 0.0], [0.0, 0.0, 1.0]]
        )
        rotated = pts @ rot.T
        assert np.allclose(np.roll(pts, -1, axis=0), rotated, atol=1e-12)


class TestParticleCloud:
    def test_arrays_frozen(self):
        cloud = single_ring_cloud()
        with pytest.raises(ValueError):
            cloud.r[0] = 2.0

    def test_with_positions_shares_transported_fields(self):
        cloud = gaussian_cloud(nr=8, nz=8)
        moved = cloud.with_positions(cloud.r + 0.1, cloud.z - 0.2, t=1.0)
        assert moved.g is cloud.g
        assert moved.vol is cloud.vol
        assert moved.n_theta is cloud.n_theta
        assert moved.t == 1.0

    def test_from_rings_drops_zero_volume(self):
        rings = [
            VortexRing(r=0.0, z=0.0, g=5.0, vol=0.0),
            VortexRing(r=1.0, z=0.0, g=1.0, vol=2.0),
        ]
        cloud = ParticleCloud.from_rings(rings, alpha=0.5)
        assert cloud.n == 1
        assert cloud.r[0] == 1.0

    def test_source_nodes_order_and_weights(self):
        cloud = ParticleCloud.from_rings(
            [
                VortexRing(r=1.0, z=0.0, g=2.0, vol=3.0, n_theta=4),
                VortexRing(r=0.5, z=1.0, g=-1.0, vol=2.0, n_theta=4),
            ],
            alpha=0.3,
        )
        nodes, nw = cloud.source_nodes
        assert nodes.shape == (8, 3)
        # ring-major, node-minor
        assert np.allclose(nodes[0], [1, 0, 0], atol=1e-15)
        assert np.allclose(nodes[4], [0.5, 0, 1.0], atol=1e-15)
        assert np.allclose(nw[:4], 2.0 * 3.0 / 4.0)
        assert np.allclose(nw[4:], -1.0 * 2.0 / 4.0)

    def test_mixed_n_theta_nodes(self):
        cloud = ParticleCloud.from_rings(
            [
                VortexRing(r=1.0, z=0.0, g=1.0, vol=1.0, n_theta=4),
                VortexRing(r=2.0, z=0.5, g=1.0, vol=1.0, n_theta=8),
            ],
            alpha=0.3,
        )
        nodes, nw = cloud.source_nodes
        assert nodes.shape == (12, 3)
        assert nw[:4] == pytest.approx(0.25)
        assert nw[4:] == pytest.approx(0.125)

    def test_advection_points_coincide_with_first_node(self):
        cloud = gaussian_cloud(nr=6, nz=6)
        nodes, _ = cloud.source_nodes
        pts = cloud.advection_points()
        nth = int(cloud.n_theta[0])
        assert np.array_equal(pts, nodes[::nth])


class TestLpNorm:
    def test_constant_field(self):
        n = 5
        cloud = ParticleCloud(
            r=np.linspace(0.5, 1.5, n),
            z=np.zeros(n),
            g=np.full(n, 3.0),
            vol=np.full(n, 0.2),
            n_theta=np.full(n, 8, dtype=np.int64),
            alpha=1.0,
        )
        for p in (1.0, 2.0, 3.5):
            expected = 3.0 * (n * 0.2) ** (1.0 / p)
            assert lp_norm(cloud, p) == pytest.approx(expected, rel=1e-14)
        assert lp_norm(cloud, math.inf) == 3.0

    def test_p_below_one_rejected(self):
        with pytest.raises(ValueError):
            lp_norm(single_ring_cloud(), 0.5)

    def test_empty_cloud_rejected(self):
        empty = ParticleCloud(
            r=np.zeros(0),
            z=np.zeros(0),
            g=np.zeros(0),
            vol=np.zeros(0),
            n_theta=np.zeros(0, dtype=np.int64),
            alpha=1.0,
        )
        with pytest.raises(ValueError):
            lp_norm(empty, 2.0)


class TestInitFromProfile:
    def test_zero_profile_gives_empty_cloud(self):
        cloud = init_from_profile(
            lambda r, z: np.zeros_like(r), (0, 2, -1, 1), 16, 16, 8, alpha=0.5
        )
        assert cloud.n == 0

    def test_gaussian_mass_against_quadrature(self):
        A, R, sigma = 1.0, 1.0, 0.1
        profile = gaussian_ring_profile(A, R, sigma)
        cloud = init_from_profile(profile, (0, 2, -1, 1), 128, 128, 8, alpha=0.5)
        total = float(np.sum(cloud.weights))
        quad, _ = dblquad(
            lambda z, r: profile(r, z) * 2.0 * np.pi * r, 0.0, 2.0, -1.0, 1.0,
            epsabs=1e-12, epsrel=1e-12,
        )
        assert total == pytest.approx(quad, rel=5e-3)
        # closed form 2 pi^2 A sigma^2 R (1 + O(sigma^2/R^2))
        closed = 2.0 * np.pi**2 * A * sigma**2 * R
        assert total == pytest.approx(closed, rel=5e-3)

    def test_refinement_consistency(self):
        profile = gaussian_ring_profile(1.0, 1.0, 0.1)
        c1 = init_from_profile(profile, (0, 2, -1, 1), 64, 64, 8, alpha=0.5)
        c2 = init_from_profile(profile, (0, 2, -1, 1), 128, 128, 8, alpha=0.5)
        s1, s2 = float(np.sum(c1.weights)), float(np.sum(c2.weights))
        assert abs(s1 - s2) <= 1e-3 * abs(s2)

    def test_support_overflow_rejected(self):
        profile = gaussian_ring_profile(1.0, 1.0, 0.3)
        with pytest.raises(SupportError) as exc:
            init_from_profile(profile, (0.7, 1.3, -0.3, 0.3), 32, 32, 8, alpha=0.5)
        assert 0.0 < exc.value.overflow_fraction < 1.0


class TestMeasureData:
    def test_total_variation(self):
        data = MeasureData.from_atoms([(1.0, 0.0, 2.5), (0.8, 0.3, -1.5)])
        assert data.total_variation == 4.0

    def test_atoms_must_sit_in_declared_box(self):
        with pytest.raises(ValueError):
            MeasureData.from_atoms([(1.0, 0.0, 1.0)], box=(0.0, 0.5, -1.0, 1.0))

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            MeasureData.from_atoms([(-1.0, 0.0, 1.0)])
