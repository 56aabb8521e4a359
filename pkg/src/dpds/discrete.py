"""Discrete-time primal-dual algorithm and its EXTRA form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import DUAL_ZERO_TOL, check_finite, ct_rhs, laplacian_of
from .errors import NonZeroDualInit
from .state import FlowParams, NetworkState, Trajectory, residual_series


@dataclass(frozen=True, eq=False)
class MixingPair:
    """EXTRA mixing matrices ``W = I - h alpha L`` and ``W~ = W + h^2 beta^2 L``."""

    W: np.ndarray
    Wtilde: np.ndarray

    @classmethod
    def from_params(cls, g, params: FlowParams, h: float) -> "MixingPair":
        L = laplacian_of(g)
        W = np.eye(L.shape[0]) - h * params.alpha * L
        return cls(W, W + h * h * params.beta ** 2 * L)


def dt_step(s: NetworkState, params: FlowParams, h: float, g, obj) -> NetworkState:
    """One simultaneous update.

    ``x+ = x - h (alpha L x + beta v + grad f~(x))`` and ``v+ = v + h beta L x``,
    both from the pre-step state. This is exactly an explicit Euler step of the
    main flow.
    """
    if not h > 0:
        raise ValueError(f"stepsize must be positive, got {h}")
    dx, dv = ct_rhs(s, params, g, obj)
    return NetworkState(s.x + h * dx, s.v + h * dv)


def run_dt(s0: NetworkState, params: FlowParams, h: float, g, obj, K: int,
           record_every: int = 1) -> Trajectory:
    """``K`` iterations from ``s0`` (which must have ``v = 0``)."""
    if K < 1:
        raise ValueError("need at least one iteration (K >= 1)")
    if not h > 0:
        raise ValueError(f"stepsize must be positive, got {h}")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    if np.abs(s0.v).max() > DUAL_ZERO_TOL:
        raise NonZeroDualInit("the discrete algorithm starts from v(0) = 0")

    L = laplacian_of(g)
    x, v = s0.x.copy(), s0.v.copy()
    steps, xs, vs = [0], [x.copy()], [v.copy()]
    for k in range(1, K + 1):
        dx, dv = ct_rhs(NetworkState(x, v), params, L, obj)
        x, v = x + h * dx, v + h * dv
        check_finite(x, v, k)
        if k % record_every == 0 or k == K:
            steps.append(k)
            xs.append(x.copy())
            vs.append(v.copy())

    steps = np.array(steps)
    xs = np.array(xs)
    return Trajectory("dt", steps, steps.astype(float), xs, np.array(vs), h,
                      residual=residual_series(obj, xs),
                      meta={"alpha": params.alpha, "beta": params.beta, "K": K})


def run_extra(x0, params: FlowParams, h: float, g, obj, K: int) -> np.ndarray:
    """EXTRA recursion on the primal only; returns ``x(0..K)`` of shape ``(K+1, n, p)``.

    ``x(1) = W x(0) - h grad(x(0))`` and
    ``x(k+2) = (I + W) x(k+1) - W~ x(k) - h (grad(x(k+1)) - grad(x(k)))``.
    """
    mix = MixingPair.from_params(g, params, h)
    x_prev = np.asarray(x0, dtype=float)
    g_prev = obj.grad_stacked(x_prev)
    xs = [x_prev]
    x_cur = mix.W @ x_prev - h * g_prev
    xs.append(x_cur)
    IW = np.eye(mix.W.shape[0]) + mix.W
    for _ in range(K - 1):
        g_cur = obj.grad_stacked(x_cur)
        x_next = IW @ x_cur - mix.Wtilde @ x_prev - h * (g_cur - g_prev)
        x_prev, x_cur, g_prev = x_cur, x_next, g_cur
        xs.append(x_cur)
    return np.array(xs)


def verify_extra_equivalence(s0: NetworkState, params: FlowParams, h: float, g, obj, K: int) -> float:
    """Largest ``||x_a(k) - x_b(k)||`` between the primal-dual run and EXTRA."""
    traj = run_dt(s0, params, h, g, obj, K)
    extra = run_extra(s0.x, params, h, g, obj, K)
    return float(max(np.linalg.norm(a - b) for a, b in zip(traj.x, extra)))
