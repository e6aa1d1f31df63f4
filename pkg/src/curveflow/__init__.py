"""Energy-preserving flow of locally convex plane curves toward a target curve."""

from types import ModuleType as _ModuleType

from .analysis import (ConvergenceReport, build_report, curve_distance_mod_translation,
                       decay_fit, limit_constant, sweep_bounds, theoretical_harnack_bound)
from .config import SimulationConfig, build_problem, load_config, parse_config, serialize_config
from .errors import (ClosureError, ConfigError, CurveflowError, EnergyDriftError, FlowError,
                     NoRootError, NonConvexError, PositivityError, ResolutionError,
                     WindingMismatchError)
from .geometry import (Harmonic, PlaneCurve, RadiusProfile, SupportProfile, TangentAngleGrid,
                       TrigSupportSpec, closure_defect, curve_from_support, elastic_energy,
                       eval_trig_support, mfold_cover, radius_from_support, reconstruct_curve,
                       rescale_to_match_energy, summarize, support_from_radius, winding_number)
from .io import render_svg
from .solver import (FlowProblem, FlowState, SolverConfig, StepDiagnostics, evolve_support,
                     nonlocal_term, normal_velocity_diagnostic, run, step, velocity)

__version__ = "0.1.0"

__all__ = [name for name, obj in globals().items()
           if not name.startswith("_") and not isinstance(obj, _ModuleType)]
