"""Implicit viscosity and anchor schemes for commuting nonexpansive semigroups on l^p spaces."""

from .estimators import SunnyRetraction
from .exceptions import (
    CertificationError,
    ConfigError,
    DomainError,
    InfeasibleError,
    UnsupportedGeneratorError,
)
from .lp_space import LpSpace, pairing
from .means import FiniteMean, apply_mean, cesaro_mean, mean_orbit_cache, regularity_defect
from .scheme import (
    AffineContraction,
    ConstantContraction,
    HarmonicSchedule,
    LogSchedule,
    PowerSchedule,
    ScaledContraction,
    SchemeConfig,
    Trace,
    epsilon_schedule_eval,
    run_anchor,
    run_viscosity,
    solve_implicit,
)
from .semigroup import AffineMap, Ball, Box, ClampMap, Composition, FixedSet, Representation
from .verify import (
    DiagnosticReport,
    approx_fixed_membership,
    final_bound_check,
    gamma_estimate,
    projection_oracle,
    variational_inequality,
)

__version__ = "0.1.0"

__all__ = [
    "AffineContraction",
    "AffineMap",
    "Ball",
    "Box",
    "CertificationError",
    "ClampMap",
    "Composition",
    "ConfigError",
    "ConstantContraction",
    "DiagnosticReport",
    "DomainError",
    "FiniteMean",
    "FixedSet",
    "HarmonicSchedule",
    "InfeasibleError",
    "LogSchedule",
    "LpSpace",
    "PowerSchedule",
    "Representation",
    "ScaledContraction",
    "SchemeConfig",
    "SunnyRetraction",
    "Trace",
    "UnsupportedGeneratorError",
    "apply_mean",
    "approx_fixed_membership",
    "cesaro_mean",
    "epsilon_schedule_eval",
    "final_bound_check",
    "gamma_estimate",
    "mean_orbit_cache",
    "pairing",
    "projection_oracle",
    "regularity_defect",
    "run_anchor",
    "run_viscosity",
    "solve_implicit",
    "variational_inequality",
]
