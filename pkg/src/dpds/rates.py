"""Closed-form convergence constants for the continuous and discrete algorithms.

Notation follows the usual primal-dual analysis: ``nu1`` is the RSI constant
of the augmented cost, ``eps1..eps5`` and ``eta`` are the Lyapunov constants,
``ct_rate`` the exponential rate of the flow and ``dt_rate(h)`` the linear rate
of the iteration.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import IotaOutOfRange, ThresholdViolation
from .graph import SpectralData
from .objective import Objective, Sampler


@dataclass(frozen=True)
class ProblemConstants:
    n: int
    L_f: float
    nu: float
    rho2: float
    rho: float
    alpha: float
    beta: float
    nu_estimated: bool = False

    def __post_init__(self):
        for k in ("n", "L_f", "nu", "rho2", "rho", "alpha", "beta"):
            val = getattr(self, k)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{k} must be positive and finite, got {val}")

    @classmethod
    def from_problem(cls, spec: SpectralData, obj: Objective, alpha: float, beta: float) -> "ProblemConstants":
        if obj.nu is None:
            raise ValueError("objective has no RSI constant; declare one or use estimate_nu")
        return cls(obj.n, obj.lipschitz, obj.nu, spec.rho2, spec.rho, alpha, beta, obj.nu_estimated)


def alpha_threshold(pc: ProblemConstants) -> float:
    """Smallest consensus gain covered by the theory: ``(2 n L_f^2 + nu L_f) / (nu rho2)``."""
    return (2 * pc.n * pc.L_f ** 2 + pc.nu * pc.L_f) / (pc.nu * pc.rho2)


def _require_threshold(pc):
    thr = alpha_threshold(pc)
    if not pc.alpha > thr:
        raise ThresholdViolation(f"alpha = {pc.alpha:g} does not exceed the threshold {thr:g}")


def nu1(pc: ProblemConstants) -> float:
    _require_threshold(pc)
    return min(pc.nu / (2 * pc.n),
               pc.alpha * pc.rho2 - (2 * pc.n * pc.L_f ** 2 + pc.nu * pc.L_f) / pc.nu)


def nu1_convex(pc: ProblemConstants, iota: float) -> float:
    """Augmented RSI constant when every local cost is convex; any ``alpha > 0``."""
    upper = pc.nu / (2 * pc.n * pc.L_f)
    if not 0 < iota < upper:
        raise IotaOutOfRange(f"iota must lie in (0, {upper:g}), got {iota}")
    return min(pc.nu / pc.n - 2 * pc.L_f * iota,
               pc.alpha * pc.rho2 * iota ** 2 / (1 + iota ** 2))


@dataclass(frozen=True)
class RateConstants:
    alpha_min: float
    nu1: float
    eps1: float
    eps2: float
    eps3: float
    eps4: float
    eps5: float
    eta: float
    ct_rate: float
    h_max: float
    estimated: bool = False

    def dt_rate(self, h: float) -> float:
        """Guaranteed per-iteration contraction of ``||x(k) - P(x(k))||``."""
        return 1.0 - h * (2 * self.eps2 * self.eps4 - h * self.eta * self.eps3 * self.eps5) / (
            4 * self.eps3 * self.eps4)

    def lyapunov_factor(self, h: float) -> float:
        """Guaranteed per-iteration contraction of V."""
        return 1.0 - h * (2 * self.eps2 * self.eps4 - h * self.eta * self.eps3 * self.eps5) / (
            2 * self.eps3 * self.eps4)

    @property
    def v_rate(self) -> float:
        """Exponential decay rate of V along the flow, ``eps2/eps3``."""
        return self.eps2 / self.eps3

    @property
    def h_best(self) -> float:
        """Stepsize minimising ``dt_rate`` over ``(0, h_max)``."""
        return self.eps2 * self.eps4 / (self.eta * self.eps3 * self.eps5)

    def as_dict(self) -> dict:
        return asdict(self)


def flow_constants(pc: ProblemConstants) -> dict:
    """Constants of the continuous-time guarantee."""
    n1 = nu1(pc)
    eps1 = max((pc.L_f ** 2 / (2 * pc.beta) + pc.rho * pc.beta) / n1, pc.beta / pc.alpha)
    eps2 = min(pc.beta / 2, eps1 * n1)
    eps3 = max(eps1 / pc.rho2 + pc.alpha / (2 * pc.beta) + 0.5, eps1 + 0.5)
    return {"nu1": n1, "eps1": eps1, "eps2": eps2, "eps3": eps3, "ct_rate": eps2 / (2 * eps3)}


def iteration_constants(pc: ProblemConstants) -> dict:
    """Constants of the discrete-time guarantee; ``dt_rate_fn(h)`` is the rate at stepsize h."""
    t1 = flow_constants(pc)
    eps1, eps2, eps3 = t1["eps1"], t1["eps2"], t1["eps3"]
    eps4 = eps1 * min(1 / pc.rho, 0.5)
    eps5 = max(pc.beta ** 2 * pc.rho ** 2 + 3 * pc.alpha ** 2 * pc.rho ** 2 + 3 * pc.L_f ** 2,
               3 * pc.beta ** 2)
    eta = math.sqrt(2) * max(2 * eps1 / pc.rho2 + pc.alpha + 1, 4 * eps1 + 1)
    h_max = 2 * eps2 * eps4 / (eta * eps3 * eps5)

    def dt_rate_fn(h):
        return 1 - h * (2 * eps2 * eps4 - h * eta * eps3 * eps5) / (4 * eps3 * eps4)

    return {"eps4": eps4, "eps5": eps5, "eta": eta, "h_max": h_max, "dt_rate_fn": dt_rate_fn}


def rate_constants(pc: ProblemConstants) -> RateConstants:
    t1 = flow_constants(pc)
    t2 = iteration_constants(pc)
    return RateConstants(alpha_threshold(pc), t1["nu1"], t1["eps1"], t1["eps2"], t1["eps3"],
                         t2["eps4"], t2["eps5"], t2["eta"], t1["ct_rate"], t2["h_max"],
                         estimated=pc.nu_estimated)


# --------------------------------------------------------------------------
# sampling check of the augmented RSI inequality


@dataclass
class AugmentedRSIReport:
    min_slack: float
    passed: bool
    checked: int
    worst_point: np.ndarray


def augmented_rsi_slack(obj: Objective, laplacian, alpha: float, nu1_value: float, X) -> float:
    """``(grad f~(x) - grad f~(x*))^T (x - x*) + alpha x^T L x - nu1 ||x - x*||^2``.

    ``x*`` is the projection of the stacked point onto the consensus optimal set.
    """
    X = np.asarray(X, dtype=float)
    Xs = obj.project_consensus_opt(X)
    d = X - Xs
    secant = np.sum((obj.grad_stacked(X) - obj.grad_stacked(Xs)) * d)
    return float(secant + alpha * np.sum(X * (laplacian @ X)) - nu1_value * np.sum(d * d))


def verify_augmented_rsi(obj: Objective, spec: SpectralData, alpha: float, nu1_value: float,
                         sampler: Sampler = Sampler(count=1000), tol: float = 1e-8) -> AugmentedRSIReport:
    """Sample the augmented inequality at random stacked points.

    Half the points are uniform in the sampler box; the other half sit near
    the consensus line (block mean plus a perturbation of random scale), where
    the consensus penalty is weakest.
    """
    rng = np.random.default_rng(sampler.seed)
    n, p = obj.n, obj.p
    m = sampler.count
    pts = list(rng.uniform(sampler.low, sampler.high, size=(m - m // 2, n, p)))
    centres = rng.uniform(sampler.low, sampler.high, size=(m // 2, 1, p))
    scales = 10.0 ** rng.uniform(-4, 0, size=(m // 2, 1, 1))
    pts += list(centres + scales * rng.standard_normal((m // 2, n, p)))
    slacks = np.array([augmented_rsi_slack(obj, spec.laplacian, alpha, nu1_value, X) for X in pts])
    k = int(np.argmin(slacks))
    return AugmentedRSIReport(float(slacks[k]), bool(slacks[k] >= -tol), len(pts), pts[k])
