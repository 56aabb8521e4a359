"""Distributed primal-dual gradient algorithms under the restricted secant inequality."""

from .discrete import MixingPair, dt_step, run_dt, verify_extra_equivalence
from .dynamics import alt_ct_rhs, ct_rhs, integrate
from .graph import Graph, SpectralData, build_graph, check_connected, spectral
from .objective import Objective, make_example1, make_quadratic, make_secvi
from .rates import ProblemConstants, RateConstants, rate_constants
from .state import FlowParams, NetworkState, Trajectory

__all__ = [
    "FlowParams", "Graph", "MixingPair", "NetworkState", "Objective", "ProblemConstants",
    "RateConstants", "SpectralData", "Trajectory", "alt_ct_rhs", "build_graph",
    "check_connected", "ct_rhs", "dt_step", "integrate", "make_example1", "make_quadratic",
    "make_secvi", "rate_constants", "run_dt", "spectral", "verify_extra_equivalence",
]
