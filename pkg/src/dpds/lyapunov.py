"""Lyapunov functions of the primal-dual flow and runtime decay certificates.

With ``x0 = P(x)`` (projection onto the consensus optimal set) and
``v0 = -grad f~(x0) / beta``::

    V1 = 1/2 ||x - x0||^2 + 1/2 ||v - v0||^2_M        M = R diag(lambda1)^-1 R^T
    V2 = 2 eps1 V1 + alpha/(2 beta) ||v - v0||^2
    V3 = x^T (K_n kron I) (v - v0)
    V  = V2 + V3

The reference pair is recomputed at every evaluated state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotAMinimizer, ThresholdViolation, UnsupportedOptSet
from .graph import Graph, SpectralData, spectral
from .objective import Objective, check_gradient_singleton
from .rates import ProblemConstants, RateConstants, rate_constants
from .state import FlowParams, NetworkState, Trajectory

CT_TOL = 1e-6
DT_TOL = 1e-9

PASS, FAIL, UNMET = "pass", "fail", "precondition-unmet"


@dataclass(frozen=True, eq=False)
class LyapunovContext:
    spectral: SpectralData
    obj: Objective
    params: FlowParams
    eps1: float
    constants: RateConstants | None = None

    def __post_init__(self):
        if not self.eps1 > 0:
            raise ValueError(f"eps1 must be positive, got {self.eps1}")
        if self.spectral.n != self.obj.n:
            raise ValueError("spectral data and objective disagree on n")

    @classmethod
    def build(cls, g, obj: Objective, params: FlowParams, eps1: float | None = None) -> "LyapunovContext":
        """Context with rate constants when ``alpha`` clears the threshold.

        Below the threshold ``constants`` is None and ``eps1`` must be given.
        """
        spec = g if isinstance(g, SpectralData) else spectral(g)
        constants = None
        try:
            constants = rate_constants(ProblemConstants.from_problem(spec, obj, params.alpha, params.beta))
        except (ThresholdViolation, ValueError):
            if eps1 is None:
                raise
        return cls(spec, obj, params, constants.eps1 if eps1 is None else eps1, constants)


@dataclass(frozen=True)
class LyapunovSample:
    t_or_k: float
    V1: float
    V2: float
    V3: float
    V: float
    x0: np.ndarray = field(repr=False)
    v0: np.ndarray = field(repr=False)
    dist2: float = 0.0  # ||x - x0||^2 + ||v - v0||^2


def reference_pair(ctx: LyapunovContext, s: NetworkState):
    x0 = ctx.obj.project_consensus_opt(s.x)
    v0 = -ctx.obj.grad_stacked(x0) / ctx.params.beta
    return x0, v0


def eval_V(ctx: LyapunovContext, s: NetworkState, t_or_k: float = 0.0) -> LyapunovSample:
    x0, v0 = reference_pair(ctx, s)
    dx = s.x - x0
    dv = s.v - v0
    M = ctx.spectral.pseudo_inverse
    V1 = 0.5 * np.sum(dx * dx) + 0.5 * np.sum(dv * (M @ dv))
    dv2 = np.sum(dv * dv)
    V2 = 2 * ctx.eps1 * V1 + ctx.params.alpha / (2 * ctx.params.beta) * dv2
    V3 = np.sum(s.x * (dv - dv.mean(axis=0)))
    return LyapunovSample(float(t_or_k), float(V1), float(V2), float(V3), float(V2 + V3),
                          x0, v0, float(np.sum(dx * dx) + dv2))


def sandwich(ctx: LyapunovContext, s: NetworkState):
    """``(eps4 * d2, V, eps3 * d2)`` with ``d2 = ||x - x0||^2 + ||v - v0||^2``."""
    if ctx.constants is None:
        raise ThresholdViolation("sandwich constants need alpha above the threshold")
    smp = eval_V(ctx, s)
    return ctx.constants.eps4 * smp.dist2, smp.V, ctx.constants.eps3 * smp.dist2


def evaluate_trajectory(ctx: LyapunovContext, traj: Trajectory) -> list[LyapunovSample]:
    index = traj.times if traj.mode != "dt" else traj.steps
    return [eval_V(ctx, traj.state(k), index[k]) for k in range(len(traj))]


@dataclass
class DecayReport:
    status: str
    worst_margin: float = float("inf")
    worst_index: float | None = None
    samples: list = field(default_factory=list)
    bounds: np.ndarray | None = None
    residual_ok: bool | None = None
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def rows(self):
        """``(t_or_k, V1, V2, V3, V, bound)`` per sample."""
        bounds = self.bounds if self.bounds is not None else [float("nan")] * len(self.samples)
        return [(s.t_or_k, s.V1, s.V2, s.V3, s.V, b) for s, b in zip(self.samples, bounds)]


def check_ct_decay(ctx: LyapunovContext, traj: Trajectory, rate: float | None = None,
                   tol: float = CT_TOL) -> DecayReport:
    """Check ``V(t) <= V(0) exp(-rate t) (1 + tol)`` at every recorded sample.

    ``rate`` defaults to ``eps2/eps3``.
    """
    if traj.mode != "ct":
        return DecayReport(UNMET, note=f"certificate covers the main flow, got mode {traj.mode!r}")
    if ctx.constants is None:
        return DecayReport(UNMET, note="alpha does not exceed the threshold")
    rate = ctx.constants.v_rate if rate is None else rate
    samples = evaluate_trajectory(ctx, traj)
    V = np.array([s.V for s in samples])
    bounds = V[0] * np.exp(-rate * traj.times) * (1 + tol)
    margin = bounds - V
    k = int(np.argmin(margin))
    ok = bool(np.all(V <= bounds))
    return DecayReport(PASS if ok else FAIL, float(margin[k]), float(traj.times[k]), samples, bounds,
                       note=_assumption_note(ctx.obj))


def check_dt_decay(ctx: LyapunovContext, traj: Trajectory, h: float | None = None,
                   tol: float = DT_TOL) -> DecayReport:
    """Check the per-step contraction of V and the derived residual bound.

    Between consecutive samples ``k1 < k2`` the check is
    ``V(k2) <= factor^(k2-k1) V(k1) (1 + tol)``, and at every sample
    ``||x(k) - P(x(k))|| <= dt_rate^k sqrt(V(0)/eps4)``.
    """
    h = traj.step_size if h is None else h
    if traj.mode != "dt":
        return DecayReport(UNMET, note=f"certificate covers the discrete algorithm, got {traj.mode!r}")
    c = ctx.constants
    if c is None:
        return DecayReport(UNMET, note="alpha does not exceed the threshold")
    if not 0 < h < c.h_max:
        return DecayReport(UNMET, note=f"h = {h:g} is not below h_max = {c.h_max:g}")

    samples = evaluate_trajectory(ctx, traj)
    V = np.array([s.V for s in samples])
    k = traj.steps.astype(float)
    factor = c.lyapunov_factor(h)
    bounds = np.empty_like(V)
    bounds[0] = V[0]
    bounds[1:] = factor ** np.diff(k) * V[:-1] * (1 + tol)
    margin = bounds - V
    worst = int(np.argmin(margin))

    dist = np.array([np.linalg.norm(x - ctx.obj.project_consensus_opt(x)) for x in traj.x])
    res_bound = c.dt_rate(h) ** k * np.sqrt(V[0] / c.eps4) * (1 + tol)
    residual_ok = bool(np.all(dist <= res_bound))
    ok = bool(np.all(V <= bounds)) and residual_ok
    return DecayReport(PASS if ok else FAIL, float(margin[worst]), float(k[worst]), samples, bounds,
                       residual_ok, _assumption_note(ctx.obj))


def assumption4_holds(obj: Objective, count: int = 5) -> bool | None:
    """Sampled check that the stacked gradient is constant over the optimal set."""
    try:
        return check_gradient_singleton(obj, obj.opt_set.samples(count))
    except (NotAMinimizer, UnsupportedOptSet):
        return None


def _assumption_note(obj: Objective) -> str:
    if assumption4_holds(obj) is False:
        return "warning: the stacked gradient varies over the optimal set; v0 follows the projection"
    return ""


def context_for(graph: Graph, obj: Objective, params: FlowParams) -> LyapunovContext | None:
    """Context if the constants exist, else None."""
    try:
        return LyapunovContext.build(graph, obj, params)
    except (ThresholdViolation, ValueError):
        return None
