"""Continuous-time distributed primal-dual flows and a fixed-step integrator."""

from __future__ import annotations

import math

import numpy as np

from .errors import NonFiniteState, NonZeroDualInit, UnsupportedOptSet
from .state import FlowParams, NetworkState, Trajectory, residual_series

DIVERGENCE_NORM = 1e12
DUAL_ZERO_TOL = 1e-12


def laplacian_of(g) -> np.ndarray:
    return g.laplacian if hasattr(g, "laplacian") else np.asarray(g, dtype=float)


def ct_rhs(s: NetworkState, params: FlowParams, g, obj):
    """Vector field of the main flow.

    ``x' = -alpha L x - beta v - grad f~(x)`` and ``v' = beta L x``.
    """
    Lx = laplacian_of(g) @ s.x
    dx = -(params.alpha * Lx) - params.beta * s.v - obj.grad_stacked(s.x)
    dv = params.beta * Lx
    return dx, dv


def alt_ct_rhs(s: NetworkState, params: FlowParams, g, obj):
    """Variant that mixes the dual through the Laplacian as well.

    ``x' = -alpha L x - beta L v - grad f~(x)``; any ``v(0)`` is allowed.
    """
    L = laplacian_of(g)
    Lx = L @ s.x
    dx = -(params.alpha * Lx) - params.beta * (L @ s.v) - obj.grad_stacked(s.x)
    dv = params.beta * Lx
    return dx, dv


FLOWS = {"ct": ct_rhs, "ct-alt": alt_ct_rhs}


def _euler(rhs, x, v, dt, *args):
    dx, dv = rhs(NetworkState(x, v), *args)
    return x + dt * dx, v + dt * dv


def _rk4(rhs, x, v, dt, *args):
    k1x, k1v = rhs(NetworkState(x, v), *args)
    k2x, k2v = rhs(NetworkState(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v), *args)
    k3x, k3v = rhs(NetworkState(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v), *args)
    k4x, k4v = rhs(NetworkState(x + dt * k3x, v + dt * k3v), *args)
    return (x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))


STEPPERS = {"euler": _euler, "rk4": _rk4}


def check_finite(x, v, at):
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise NonFiniteState(f"state became non-finite at {at}", at)
    if np.linalg.norm(x) > DIVERGENCE_NORM:
        raise NonFiniteState(f"||x|| exceeded {DIVERGENCE_NORM:g} at {at}", at)


def integrate(rhs, s0: NetworkState, params: FlowParams, g, obj, dt: float = 1e-3,
              T: float = 1.0, method: str = "rk4", record_every: int = 1) -> Trajectory:
    """Fixed-step integration of a flow over ``[0, T]``.

    ``rhs`` is ``"ct"``, ``"ct-alt"`` or a callable with the signature of
    :func:`ct_rhs`. Samples are kept at ``t = 0``, every ``record_every``
    steps, and at ``t = T``; the last step is shortened if ``T/dt`` is not an
    integer.
    """
    name = rhs if isinstance(rhs, str) else next(
        (k for k, f in FLOWS.items() if f is rhs), getattr(rhs, "__name__", "custom"))
    if isinstance(rhs, str):
        rhs = FLOWS[rhs]
    if not dt > 0 or not T >= dt:
        raise ValueError(f"need dt > 0 and T >= dt, got dt={dt}, T={T}")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    if rhs is ct_rhs and np.abs(s0.v).max() > DUAL_ZERO_TOL:
        raise NonZeroDualInit("the main flow starts from v(0) = 0")
    step = STEPPERS[method]

    nsteps = max(1, math.ceil(T / dt - 1e-9))
    x, v = s0.x.copy(), s0.v.copy()
    steps, times, xs, vs = [0], [0.0], [x.copy()], [v.copy()]
    t = 0.0
    for k in range(1, nsteps + 1):
        h = dt
        if k == nsteps and T - (nsteps - 1) * dt < dt * (1.0 - 1e-9):
            h = T - (nsteps - 1) * dt
        x, v = step(rhs, x, v, h, params, g, obj)
        t = T if k == nsteps else k * dt
        check_finite(x, v, t)
        if k % record_every == 0 or k == nsteps:
            steps.append(k)
            times.append(t)
            xs.append(x.copy())
            vs.append(v.copy())

    xs = np.array(xs)
    return Trajectory(name, np.array(steps), np.array(times), xs,
                      np.array(vs), dt, residual=_safe_residual(obj, xs),
                      meta={"method": method, "T": T, "alpha": params.alpha, "beta": params.beta})


def _safe_residual(obj, xs):
    try:
        return residual_series(obj, xs)
    except UnsupportedOptSet:
        return None


def is_equilibrium(s: NetworkState, params: FlowParams, g, obj, tol: float = 1e-8) -> bool:
    dx, dv = ct_rhs(s, params, g, obj)
    return bool(np.linalg.norm(dx) <= tol and np.linalg.norm(dv) <= tol)
