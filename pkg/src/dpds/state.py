"""Network state, flow gains and recorded trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Stacked primal ``x`` and dual ``v``, each of shape ``(n, p)``."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        v = np.array(self.v, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if v.ndim == 1:
            v = v[:, None]
        if x.shape != v.shape:
            raise ValueError(f"x and v shapes differ: {x.shape} vs {v.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @classmethod
    def primal(cls, x) -> "NetworkState":
        """State with the given primal and a zero dual."""
        x = np.array(x, dtype=float)
        return cls(x, np.zeros_like(x if x.ndim > 1 else x[:, None]))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class FlowParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")


@dataclass
class Trajectory:
    """Recorded samples of a run.

    ``steps`` holds the integer step or iteration of each sample and ``times``
    the matching continuous time (``steps * dt``; equal to ``steps`` for the
    discrete algorithm). ``x`` and ``v`` have shape ``(samples, n, p)``.
    """

    mode: str
    steps: np.ndarray
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    step_size: float
    residual: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.steps)

    def state(self, k: int) -> NetworkState:
        return NetworkState(self.x[k], self.v[k])

    @property
    def final(self) -> NetworkState:
        return self.state(-1)


def residual_series(obj, xs) -> np.ndarray:
    """``||x(k) - P(x(k))|| / ||x(0) - P(x(0))||`` with the first entry fixed at 1.

    If the run starts inside the optimal set the raw distances are reported.
    """
    dist = np.array([np.linalg.norm(x - obj.project_consensus_opt(x)) for x in xs])
    out = dist / dist[0] if dist[0] > 0 else dist.copy()
    out[0] = 1.0
    return out
