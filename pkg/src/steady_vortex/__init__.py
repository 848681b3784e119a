"""Concentrated steady vortices in bounded planar domains.

Energy maximization over truncated vorticity classes, the Green/Robin/
Kirchhoff-Routh machinery that locates the vortices, point-vortex dynamics,
and epsilon sweeps that fit the concentration laws.
"""

from .domain import (
    CustomMask,
    Disc,
    DomainError,
    DomainGrid,
    GreenOperator,
    Rectangle,
    StreamField,
    VorticityField,
    build_domain,
    green_apply,
    green_point,
    regular_part,
    robin,
    robin_grad,
)
from .profiles import ProfileFunction, check_hypotheses, limiting_profile, power_profile
from .landscape import VortexConfiguration, kirchhoff_routh, kr_grad, kr_minimize
from .solver import (
    MultiVortexSpec,
    SolveResult,
    SolverConfig,
    energy_kinetic,
    fixed_point_solve,
    mu_solve,
    multi_solve,
    patch_measure,
    penalty,
    solve,
    steady_residual,
    support_stats,
)
from .pointvortex import PointVortexState, equilibrium_residual, pv_integrate, pv_velocity
from .asymptotics import SweepReport, center_convergence, epsilon_sweep, profile_compare

__version__ = "0.1.0"
