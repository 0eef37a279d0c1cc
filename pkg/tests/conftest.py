import numpy as np
import pytest

from alphavortex.state import ParticleCloud, gaussian_ring_profile, init_from_profile
from alphavortex.velocity import eval_grad_batch, eval_velocity_batch


def gaussian_cloud(nr=32, nz=32, n_theta=16, alpha=0.3, amplitude=1.0, ring_radius=1.0,
                   core_width=0.1, box=(0.0, 2.0, -1.0, 1.0)):
    profile = gaussian_ring_profile(amplitude, ring_radius, core_width)
    return init_from_profile(profile, box, nr, nz, n_theta, alpha)


def single_ring_cloud(radius=1.0, z=0.0, weight=2.0 * np.pi, n_theta=16, alpha=0.1):
    """One ring whose total transported mass g*vol equals `weight`."""
    return ParticleCloud(
        r=np.array([radius]),
        z=np.array([z]),
        g=np.array([weight]),
        vol=np.array([1.0]),
        n_theta=np.array([n_theta], dtype=np.int64),
        alpha=alpha,
    )


def ring_pair_cloud(radius=1.0, separation=0.3, weight=2.0 * np.pi, n_theta=16, alpha=0.2):
    return ParticleCloud(
        r=np.array([radius, radius]),
        z=np.array([-separation / 2.0, separation / 2.0]),
        g=np.array([weight, weight]),
        vol=np.array([1.0, 1.0]),
        n_theta=np.array([n_theta, n_theta], dtype=np.int64),
        alpha=alpha,
    )


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger numba compilation once so timed checks measure the math."""
    cloud = single_ring_cloud(n_theta=4, alpha=0.5)
    pts = np.array([[0.3, 0.1, 0.2]])
    eval_velocity_batch(pts, cloud)
    eval_velocity_batch(pts, cloud, pairwise=True)
    eval_grad_batch(pts, cloud)
    from alphavortex.velocity import eval_grad_split_batch

    eval_grad_split_batch(pts, cloud)
    yield
