import numpy as np
import pytest
from scipy.integrate import quad

from alphavortex.errors import MollifyResolutionError
from alphavortex.measure import (
    bump_1d,
    delta_ring_cloud,
    mollify,
    uniform_bound_sweep,
)
from alphavortex.state import MeasureData
from alphavortex.velocity import eval_velocity


def single_atom(r=1.0, z=0.0, m=1.0):
    return MeasureData.from_atoms([(r, z, m)])


GRID = ((0.5, 1.5, -0.5, 0.5), 128, 128)


class TestBump:
    def test_unit_integral(self):
        val, err = quad(lambda s: bump_1d(s), -1, 1, epsabs=1e-13)
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_compact_support(self):
        assert bump_1d(np.array([-1.0, 1.0, 1.5, -3.0])).tolist() == [0, 0, 0, 0]


class TestMollify:
    def test_single_atom_mass_preserved(self):
        data = single_atom(m=2.5)
        for eps in (0.2, 0.1, 0.05):
            cloud = mollify(data, eps, GRID, n_theta=8, alpha=0.5)
            total = float(np.sum(cloud.weights))
            assert total == pytest.approx(2.5, rel=5e-3)

    def test_opposite_atoms_cancel_in_mass_not_variation(self):
        data = MeasureData.from_atoms([(1.0, 0.15, 1.0), (1.0, -0.15, -1.0)])
        cloud = mollify(data, 0.1, GRID, n_theta=8, alpha=0.5)
        signed = float(np.sum(cloud.weights))
        total = float(np.sum(np.abs(cloud.weights)))
        assert abs(signed) <= 1e-3
        assert total == pytest.approx(2.0, rel=5e-3)

    def test_l1_never_exceeds_total_variation_credit(self):
        data = MeasureData.from_atoms([(1.0, 0.1, 1.5), (0.9, -0.2, -0.5)])
        for eps in (0.2, 0.1, 0.05):
            cloud = mollify(data, eps, GRID, n_theta=8, alpha=0.5)
            l1 = float(np.sum(np.abs(cloud.weights)))
            assert l1 <= data.total_variation * 1.01

    def test_under_resolved_grid_rejected_naming_requirement(self):
        data = single_atom()
        with pytest.raises(MollifyResolutionError, match="need at least"):
            mollify(data, 0.02, GRID, n_theta=8, alpha=0.5)

    def test_atom_too_close_to_axis_rejected(self):
        data = MeasureData.from_atoms([(0.05, 0.0, 1.0)])
        with pytest.raises(ValueError, match="axis"):
            mollify(data, 0.2, ((0.0, 1.0, -0.5, 0.5), 128, 128), n_theta=8, alpha=0.5)

    def test_velocity_converges_to_delta_ring_first_order(self):
        # far probe: mollified velocity approaches the direct ring quadrature;
        # the grid refines with eps so sampling error stays subdominant.
        # at least first order in eps (the even mollifier actually lands
        # second order)
        data = single_atom(m=1.3)
        alpha = 0.5
        x = np.array([0.0, 0.0, 1.0])
        exact = eval_velocity(x, delta_ring_cloud(data, n_theta=32, alpha=alpha))
        errs = []
        eps_list = (0.2, 0.1, 0.05)
        for eps in eps_list:
            n = int(np.ceil(16.0 / eps))
            cloud = mollify(
                data, eps, ((0.5, 1.5, -0.5, 0.5), n, n), n_theta=32, alpha=alpha
            )
            errs.append(np.linalg.norm(eval_velocity(x, cloud) - exact))
        assert errs[0] > errs[1] > errs[2]
        rate = np.polyfit(np.log(eps_list), np.log(errs), 1)[0]
        assert rate >= 0.9

    def test_weak_star_pairing_converges(self):
        # sum w_j phi(x_j) -> m * (ring average of phi) for a fixed smooth phi
        data = single_atom(m=1.0)

        def phi(r, z):
            return np.exp(-((r - 0.8) ** 2 + (z - 0.1) ** 2))

        target = phi(1.0, 0.0)  # ring average equals the meridional value
        errs = []
        eps_list = (0.2, 0.1, 0.05)
        for eps in eps_list:
            cloud = mollify(data, eps, GRID, n_theta=8, alpha=0.5)
            pairing = float(np.sum(cloud.weights * phi(cloud.r, cloud.z)))
            errs.append(abs(pairing - target))
        assert errs[0] > errs[2]
        rate = np.polyfit(np.log(eps_list), np.log(errs), 1)[0]
        assert rate >= 0.9


class TestDeltaRingCloud:
    def test_weights_equal_masses(self):
        data = MeasureData.from_atoms([(1.0, 0.0, 0.7), (1.2, 0.5, -0.3)])
        cloud = delta_ring_cloud(data, n_theta=16, alpha=0.4)
        assert np.allclose(cloud.weights, [0.7, -0.3])


class TestUniformBoundSweep:
    def test_zero_mass_data_all_statistics_zero(self):
        data = MeasureData.from_atoms([(1.0, 0.0, 0.0)])
        rep = uniform_bound_sweep(
            data, (0.2, 0.1), 0.5, [(0.0, 0.0, 1.0)], GRID, n_theta=8, horizon=0.05, dt=0.05
        )
        assert all(rec.sup_u == 0.0 for rec in rep.records)

    def test_single_ring_sweep_uniform_envelope(self):
        data = single_atom(m=1.0)
        probes = [(0.0, 0.0, 1.0), (2.0, 0.0, 0.0), (0.0, 1.5, 0.5)]
        rep = uniform_bound_sweep(
            data, (0.2, 0.1, 0.05), 0.5, probes, GRID, n_theta=16, horizon=0.1, dt=0.05
        )
        assert not rep.failures
        assert rep.envelope_variation < 0.10
        for eps, l1 in rep.l1_by_eps.items():
            assert l1 <= rep.total_variation * 1.01

    def test_alpha_halving_envelope(self):
        data = single_atom(m=1.0)
        probes = [(0.0, 0.0, 1.0)]
        sup = {}
        for alpha in (0.5, 0.25):
            rep = uniform_bound_sweep(
                data, (0.1,), alpha, probes, GRID, n_theta=16, horizon=0.05, dt=0.05
            )
            sup[alpha] = max(r.sup_u for r in rep.records)
        # the uniform bound envelope scales like 1/alpha^2
        assert sup[0.25] <= 4.0 * sup[0.5] * 1.05

    def test_partial_report_on_failure(self):
        data = single_atom()
        # second eps under-resolves the grid: failure attached, first one kept
        rep = uniform_bound_sweep(
            data, (0.2, 0.01), 0.5, [(0.0, 0.0, 1.0)], GRID, n_theta=8, horizon=0.05, dt=0.05
        )
        assert len(rep.failures) == 1
        assert rep.failures[0][0] == 0.01
        assert any(rec.eps == 0.2 for rec in rep.records)

    def test_increasing_eps_list_rejected(self):
        with pytest.raises(ValueError):
            uniform_bound_sweep(
                single_atom(), (0.1, 0.2), 0.5, [(0.0, 0.0, 1.0)], GRID, n_theta=8
            )
