"""Numerical laboratory for the relativistic Vlasov-Klein-Gordon system.

The package couples a collisionless phase-space density f(t, x, v) to a
scalar Klein-Gordon field u(t, x) through the spatial density
rho = integral of f over v:

    df/dt + vhat . dxf - dxu . dvf = 0,      vhat = v / sqrt(1 + |v|^2)
    d2u/dt2 - Lap u + u = -rho

It provides

* relativistic characteristic-flow integration with variational matrices
  (:mod:`vkglab.kinematics`),
* Bessel-ratio special functions, the retarded first/second derivative
  kernels on the unit sphere, and the S/T derivative calculus
  (:mod:`vkglab.bessel_kernels`),
* a 1D Klein-Gordon solver combining exact modal evolution with the
  retarded J0-kernel source integral, cross-checked by an independent
  finite-difference solver (:mod:`vkglab.field1d`),
* a semi-Lagrangian Vlasov solver with support tracking
  (:mod:`vkglab.vlasov1d`),
* coupled time marching and the Picard fixed-point iteration with
  convergence and continuation monitors (:mod:`vkglab.picard`),
* scenario configs, a run harness, and a small CLI
  (:mod:`vkglab.scenarios`, :mod:`vkglab.harness`, :mod:`vkglab.cli`).
"""

from vkglab.kinematics import (
    CharacteristicState,
    FlowResult,
    advance_characteristics,
    flow_jacobian_fd_check,
    hat_v,
    hat_v_jacobian,
)
from vkglab.bessel_kernels import (
    BesselRatioTable,
    KernelQuery,
    bessel_ratio,
    kernel_a_second,
    kernel_a_second_pieces,
    kernel_a_spatial,
    kernel_a_time,
    one_plus_omega_dot_vhat,
    sphere_average,
    st_decomposition_residual,
)
from vkglab.field1d import (
    FieldHistory,
    InitialFieldData,
    SpatialGrid1D,
    dx_u_inhomogeneous,
    dx_u_inhomogeneous_grid,
    fd_reference_solve,
    solve_homogeneous,
    u_inhomogeneous,
    u_inhomogeneous_grid,
)
from vkglab.vlasov1d import (
    InitialParticleData,
    PhaseGrid,
    compute_rho,
    measure_support,
    semi_lagrangian_step,
    solve_inhomogeneous_vlasov,
)
from vkglab.picard import (
    ConvergenceReport,
    IterateState,
    cauchy_gap,
    continuation_monitor,
    picard_iterate,
    run_coupled,
    run_picard,
)
from vkglab.diagnostics import DiagnosticsTimeline
from vkglab.scenarios import ScenarioConfig, validate_config
from vkglab.harness import emit_report, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BesselRatioTable",
    "CharacteristicState",
    "ConvergenceReport",
    "DiagnosticsTimeline",
    "FieldHistory",
    "FlowResult",
    "InitialFieldData",
    "InitialParticleData",
    "IterateState",
    "KernelQuery",
    "PhaseGrid",
    "ScenarioConfig",
    "SpatialGrid1D",
    "advance_characteristics",
    "bessel_ratio",
    "cauchy_gap",
    "compute_rho",
    "continuation_monitor",
    "dx_u_inhomogeneous",
    "dx_u_inhomogeneous_grid",
    "emit_report",
    "fd_reference_solve",
    "flow_jacobian_fd_check",
    "hat_v",
    "hat_v_jacobian",
    "kernel_a_second",
    "kernel_a_second_pieces",
    "kernel_a_spatial",
    "kernel_a_time",
    "measure_support",
    "one_plus_omega_dot_vhat",
    "picard_iterate",
    "run_coupled",
    "run_picard",
    "run_scenario",
    "semi_lagrangian_step",
    "solve_homogeneous",
    "solve_inhomogeneous_vlasov",
    "sphere_average",
    "st_decomposition_residual",
    "u_inhomogeneous",
    "u_inhomogeneous_grid",
    "validate_config",
]
