"""Forced fractional active scalar equations on the periodic unit square."""
from .config import ConfigError, ExperimentConfig, MultiplierConfig, load_config
from .control import ControlResult, approximate_control, control_gradient, control_objective
from .evolution import (BlowupError, CFLError, SolverError, SourceTerm, TimeGrid, Trajectory,
                        lq_bound_check, read_trajectory, solve_active_scalar, solve_dual,
                        solve_fractional_diffusion, write_trajectory)
from .geometry import Window, radial_bump
from .inverse import (ProbePair, maps_equal, reconstruct_kernel_gradient,
                      second_order_identity_residual, static_pairing)
from .linearization import (convergence_rate_fit, first_linearization_residual,
                            second_linearization_residual)
from .spectral import FourierLattice, MultiplierSpec, SpectralField, velocity

__version__ = "0.1.0"

__all__ = [
    "BlowupError", "CFLError", "ConfigError", "ControlResult", "ExperimentConfig",
    "FourierLattice", "MultiplierConfig", "MultiplierSpec", "ProbePair", "SolverError",
    "SourceTerm", "SpectralField", "TimeGrid", "Trajectory", "Window", "approximate_control",
    "control_gradient", "control_objective", "convergence_rate_fit",
    "first_linearization_residual", "load_config", "lq_bound_check", "maps_equal",
    "radial_bump", "read_trajectory", "reconstruct_kernel_gradient",
    "second_linearization_residual", "second_order_identity_residual", "solve_active_scalar",
    "solve_dual", "solve_fractional_diffusion", "static_pairing", "velocity",
    "write_trajectory",
]
