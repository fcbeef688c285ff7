"""Numerical laboratory for the modified Camassa-Holm equation.

Spectral operators on the torus, Littlewood-Paley blocks and Besov norms,
the norm-inflation datum, an RK4 pseudospectral solver with particle
paths, and measured product/commutator estimates.
"""

__version__ = "0.1.0"

from .besov import B0_INF_1, B0_INF_INF, BesovIndex, besov_norm, norm_profile, weighted_norm
from .dynamics import MochParams, MochState, compute_m, flow_map, m_form_residual, rhs, solve, step_rk4
from .errors import (
    BlowUpError,
    DiffeomorphismLost,
    GridError,
    MochError,
    ParameterError,
    ResolutionError,
)
from .grid import Grid, RealField, derivative, dealias, helmholtz_inverse, make_grid, to_physical, to_spectral
from .initial_data import algebra_defect, build_gamma0, periodized_heaviside, smoothed_step
from .littlewood_paley import bernstein_check, block, bony_decompose, build_partition, lowpass

__all__ = [
    "B0_INF_1", "B0_INF_INF", "BesovIndex", "BlowUpError", "DiffeomorphismLost", "Grid",
    "GridError", "MochError", "MochParams", "MochState", "ParameterError", "RealField",
    "ResolutionError", "algebra_defect", "bernstein_check", "besov_norm", "block",
    "bony_decompose", "build_gamma0", "build_partition", "compute_m", "dealias", "derivative",
    "flow_map", "helmholtz_inverse", "lowpass", "m_form_residual", "make_grid", "norm_profile",
    "periodized_heaviside", "rhs", "smoothed_step", "solve", "step_rk4", "to_physical",
    "to_spectral", "weighted_norm",
]
