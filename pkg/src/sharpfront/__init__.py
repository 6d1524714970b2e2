"""Travelling fronts for bistable reaction-diffusion with non-Lipschitz reactions."""
from .errors import ConfigError, ConvergenceError, HypothesisViolation, SharpFrontError
from .reaction import ReactionSpec, check_hypotheses, estimate_secant_constants, eval_F, eval_f
from .wave import SpeedResult, WaveControl, integrate_y, solve_speed, verify_speed_identity
from .profile import ProfileTable, eval_profile, front_width, reconstruct_profile
from .pde import Domain, InitialData, SchemeCtrl, Trajectory, run
from .diagnostics import build_envelopes, convergence_report, estimate_shift, lyapunov_series
from .config import RunConfig, parse_config

__all__ = [
    "ConfigError", "ConvergenceError", "HypothesisViolation", "SharpFrontError",
    "ReactionSpec", "check_hypotheses", "estimate_secant_constants", "eval_F", "eval_f",
    "SpeedResult", "WaveControl", "integrate_y", "solve_speed", "verify_speed_identity",
    "ProfileTable", "eval_profile", "front_width", "reconstruct_profile",
    "Domain", "InitialData", "SchemeCtrl", "Trajectory", "run",
    "build_envelopes", "convergence_report", "estimate_shift", "lyapunov_series",
    "RunConfig", "parse_config",
]
