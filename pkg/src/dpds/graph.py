"""Weighted undirected communication graphs and Laplacian spectral data.

Stacked network quantities are stored as ``(n, p)`` arrays, one row per
agent, so ``(L kron I_p) x`` is simply ``L @ X`` and no Kronecker product is
ever formed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DisconnectedGraph, EigenFailure, InvalidWeight

ZERO_EIG_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Graph:
    """Weighted undirected graph on vertices ``0..n-1``.

    Construction validates symmetry, the zero diagonal, nonnegativity and
    connectivity.
    """

    n: int
    weights: np.ndarray
    laplacian: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if self.n < 1 or w.shape != (self.n, self.n):
            raise ValueError(f"weights must be {self.n}x{self.n}, got {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidWeight("weights must be finite and nonnegative")
        if np.any(np.diag(w) != 0):
            raise InvalidWeight("self-loops are not allowed")
        if not np.array_equal(w, w.T):
            raise InvalidWeight("weight matrix must be symmetric")
        if not check_connected(w):
            raise DisconnectedGraph(f"graph on {self.n} vertices is not connected")
        lap = np.diag(w.sum(axis=1)) - w
        w.setflags(write=False)
        lap.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "laplacian", lap)

    @property
    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def edges(self) -> list[tuple[int, int, float]]:
        """Edge list ``(i, j, w)`` with ``i < j`` and 0-based ids."""
        i, j = np.nonzero(np.triu(self.weights))
        return [(int(a), int(b), float(self.weights[a, b])) for a, b in zip(i, j)]


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigen-structure of a connected graph's Laplacian.

    ``Q = [r R]`` is orthogonal with ``r = 1/sqrt(n)``, and
    ``L = R diag(lambda1) R^T`` with ``lambda1`` sorted ascending.
    """

    laplacian: np.ndarray
    eigenvalues: np.ndarray
    r: np.ndarray
    R: np.ndarray
    lambda1: np.ndarray
    rho2: float
    rho: float

    @property
    def n(self) -> int:
        return self.laplacian.shape[0]

    @property
    def Q(self) -> np.ndarray:
        return np.column_stack([self.r, self.R])

    @property
    def centering(self) -> np.ndarray:
        return centering_matrix(self.n)

    @property
    def pseudo_inverse(self) -> np.ndarray:
        """``R diag(lambda1)^-1 R^T``, the Laplacian's pseudo-inverse."""
        return (self.R / self.lambda1) @ self.R.T


def centering_matrix(n: int) -> np.ndarray:
    """K_n = I - (1/n) 1 1^T."""
    return np.eye(n) - np.full((n, n), 1.0 / n)


def check_connected(g) -> bool:
    """Breadth-first connectivity test over positive-weight edges.

    Accepts a :class:`Graph` or a raw adjacency matrix.
    """
    w = g.weights if isinstance(g, Graph) else np.asarray(g, dtype=float)
    n = w.shape[0]
    if n == 0:
        return False
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(w[i] > 0):
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def build_graph(spec: Mapping | None = None, **kwargs) -> Graph:
    """Build a graph from a topology descriptor.

    ``spec`` is a mapping like ``{"kind": "ring", "n": 10, "weight": 1.0}`` or
    ``{"kind": "custom", "n": 4, "edges": [[1, 2, 0.5], ...]}`` with 1-based
    vertex ids. Keyword arguments are merged into ``spec``.
    """
    spec = dict(spec or {}, **kwargs)
    kind = spec.get("kind", "custom")
    n = int(spec["n"])
    if n < 1:
        raise ValueError("n must be >= 1")
    weight = float(spec.get("weight", 1.0))
    if kind != "custom" and not weight > 0:
        raise InvalidWeight(f"edge weight must be positive, got {weight}")

    w = np.zeros((n, n))
    if kind == "ring":
        for i in range(n if n > 2 else n - 1):
            j = (i + 1) % n
            w[i, j] = w[j, i] = weight
    elif kind == "path":
        for i in range(n - 1):
            w[i, i + 1] = w[i + 1, i] = weight
    elif kind == "complete":
        w[:] = weight
        np.fill_diagonal(w, 0.0)
    elif kind == "star":
        w[0, 1:] = w[1:, 0] = weight
    elif kind == "custom":
        for edge in spec.get("edges", []):
            if len(edge) not in (2, 3):
                raise ValueError(f"edge must be [i, j] or [i, j, w], got {edge}")
            i, j = int(edge[0]) - 1, int(edge[1]) - 1
            ew = float(edge[2]) if len(edge) == 3 else 1.0
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge {edge} references a vertex outside 1..{n}")
            if i == j:
                raise InvalidWeight(f"self-loop at vertex {i + 1}")
            if not ew > 0:
                raise InvalidWeight(f"edge {edge} has non-positive weight")
            if w[i, j] != 0:
                raise ValueError(f"duplicate edge {edge}")
            w[i, j] = w[j, i] = ew
    else:
        raise ValueError(f"unknown graph kind {kind!r}")
    return Graph(n, w)


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 1000):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with ``w`` ascending and ``a = V diag(w) V^T``. The
    sweep stops once the off-diagonal Frobenius norm falls below
    ``tol * max(1, ||a||_F)``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, rtol=0, atol=1e-14 * max(1.0, np.abs(a).max(initial=0))):
        raise ValueError("jacobi_eigh needs a square symmetric matrix")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    target = tol * max(1.0, np.linalg.norm(a))
    offmask = ~np.eye(n, dtype=bool)

    for _ in range(max_sweeps):
        if np.sqrt(np.sum(a[offmask] ** 2)) <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if np.sqrt(np.sum(a[offmask] ** 2)) > target:
            raise EigenFailure(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def spectral(g: Graph) -> SpectralData:
    """Laplacian spectrum of a connected graph.

    For ``n == 1`` there is no positive eigenvalue; ``rho2`` is NaN and ``R``
    has no columns.
    """
    lap = g.laplacian
    n = g.n
    r = np.full(n, 1.0 / np.sqrt(n))
    if n == 1:
        return SpectralData(lap, np.zeros(1), r, np.zeros((1, 0)), np.zeros(0), float("nan"), 0.0)

    w, vecs = jacobi_eigh(lap)
    if np.count_nonzero(w <= ZERO_EIG_TOL) != 1:
        raise DisconnectedGraph("Laplacian has more than one zero eigenvalue")

    # columns for positive eigenvalues, cleaned of the residual 1_n component
    R = vecs[:, 1:]
    R = R - np.outer(r, r @ R)
    R, upper = np.linalg.qr(R)
    R = R * np.sign(np.diag(upper))
    lambda1 = w[1:].copy()

    for arr in (w, r, R, lambda1):
        arr.setflags(write=False)
    return SpectralData(lap, w, r, R, lambda1, float(lambda1[0]), float(lambda1[-1]))


def _min_eig(a) -> float:
    return float(jacobi_eigh((a + a.T) / 2)[0][0])


def identity_residuals(spec: SpectralData) -> dict[str, float]:
    """Violation of each Laplacian identity; every value should be near zero.

    Equalities report the max absolute entry of the difference. Matrix
    inequalities ``A <= B`` report ``max(0, -lambda_min(B - A))``.
    """
    L, K, M = spec.laplacian, spec.centering, spec.pseudo_inverse
    n = spec.n
    Q = spec.Q

    def gap(a):
        return max(0.0, -_min_eig(a))

    return {
        "L1=0": float(np.abs(L @ np.ones(n)).max()),
        "QtQ=I": float(np.abs(Q.T @ Q - np.eye(n)).max()),
        "L=R diag R^T": float(np.abs((spec.R * spec.lambda1) @ spec.R.T - L).max()),
        "M L=K": float(np.abs(M @ L - K).max()),
        "K L=L": float(np.abs(K @ L - L).max()),
        "L K=L": float(np.abs(L @ K - L).max()),
        "rho(K)=1": abs(float(jacobi_eigh(K)[0][-1]) - 1.0),
        "rho2 K<=L": gap(L - spec.rho2 * K),
        "L<=rho K": gap(spec.rho * K - L),
        "K/rho<=M": gap(M - K / spec.rho),
        "M<=K/rho2": gap(K / spec.rho2 - M),
    }
