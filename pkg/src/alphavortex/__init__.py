"""Axisymmetric vortex-ring simulator for the Euler-alpha model (no swirl)."""

__version__ = "0.1.0"

from .errors import AlphaVortexError
from .kernel import AlphaParam, KernelConstants, bound_scan, f_alpha, f_prime, f_scalar, green_alpha
from .state import MeasureData, ParticleCloud, VortexRing, init_from_profile, lp_norm, sample_points
from .velocity import (
    eval_grad,
    eval_grad_batch,
    eval_hessian,
    eval_hessian_batch,
    eval_velocity,
    eval_velocity_batch,
    swirl_component,
    velocity_bound_check,
)

__all__ = [
    "AlphaParam",
    "AlphaVortexError",
    "KernelConstants",
    "MeasureData",
    "ParticleCloud",
    "VortexRing",
    "bound_scan",
    "eval_grad",
    "eval_grad_batch",
    "eval_hessian",
    "eval_hessian_batch",
    "eval_velocity",
    "eval_velocity_batch",
    "f_alpha",
    "f_prime",
    "f_scalar",
    "green_alpha",
    "init_from_profile",
    "lp_norm",
    "sample_points",
    "swirl_component",
    "velocity_bound_check",
]
