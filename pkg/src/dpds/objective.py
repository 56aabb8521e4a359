"""Local cost families, optimal sets, projections and assumption checks.

Every local cost evaluates on arrays of shape ``(..., p)`` so the same code
serves a single point, a stacked network state (one row per agent is handled
by :meth:`Objective.grad_stacked`) and batches of sample points.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import NotAMinimizer, UnsupportedOptSet

SQRT2 = np.sqrt(2.0)
HALF_SQRT2 = SQRT2 / 2.0
# sqrt((sqrt2 - 1)/2): slope offset of the last branch and the RSI constant of the
# non-convex scalar example
EX1_NU = np.sqrt((SQRT2 - 1.0) / 2.0)
_EX1_TAIL_CONST = np.sqrt(2.0 * SQRT2 - 2.0) + (5.0 - 5.0 * SQRT2) / 4.0
# |f''| at x -> 1- on the fourth branch
_EX1_KINK = (2.0 * SQRT2 - 2.0) ** -1.5

GRAD_TOL = 1e-8


# --------------------------------------------------------------------------
# optimal sets


@dataclass(frozen=True)
class Singleton:
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.atleast_1d(np.asarray(self.point, dtype=float)))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.point, x.shape).copy()

    def contains(self, x, tol=0.0):
        return bool(np.linalg.norm(np.asarray(x) - self.point) <= tol)

    def samples(self, count=3):
        return [self.point.copy()]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``lo <= x <= hi``; bounds may be infinite."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box needs lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def project(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def contains(self, x, tol=0.0):
        x = np.asarray(x)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def samples(self, count=3):
        lo = np.where(np.isfinite(self.lo), self.lo, np.minimum(self.hi, 0.0) - 1.0)
        hi = np.where(np.isfinite(self.hi), self.hi, np.maximum(lo, 0.0) + 1.0)
        lo = np.where(np.isfinite(lo), lo, hi - 1.0)
        return [lo + t * (hi - lo) for t in np.linspace(0.0, 1.0, count)]


@dataclass(frozen=True)
class SampleSet:
    """Optimal set known only through sample minimizers (no projection)."""

    points: tuple

    def project(self, x):
        raise UnsupportedOptSet("projection needs a singleton or box optimal set")

    def contains(self, x, tol=0.0):
        return any(np.linalg.norm(np.asarray(x) - p) <= tol for p in self.points)

    def samples(self, count=3):
        return [np.atleast_1d(np.asarray(p, dtype=float)) for p in self.points]


# --------------------------------------------------------------------------
# scalar piecewise family


def secvi_value(x, b1=0.0, b2=0.0, b3=0.0):
    """Five-branch non-convex scalar cost; ``b = 0`` with the first two branches
    zeroed gives the plain non-convex example."""
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, -HALF_SQRT2, HALF_SQRT2)
    xs = np.clip(x, HALF_SQRT2, 1.0) - SQRT2
    quad = b3 * x * x
    branches = [
        b1 * (x + 1.0) ** 2,
        b2 * x**4,
        1.0 - np.sqrt(1.0 - xc * xc) + quad,
        np.sqrt(1.0 - xs * xs) - SQRT2 + 1.0 + quad,
        0.5 * (x - 1.0 + EX1_NU) ** 2 + _EX1_TAIL_CONST + quad,
    ]
    return np.select(_secvi_conditions(x), branches)


def secvi_grad(x, b1=0.0, b2=0.0, b3=0.0):
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, -HALF_SQRT2, HALF_SQRT2)
    xs = np.clip(x, HALF_SQRT2, 1.0) - SQRT2
    lin = 2.0 * b3 * x
    branches = [
        2.0 * b1 * (x + 1.0),
        4.0 * b2 * x**3,
        xc / np.sqrt(1.0 - xc * xc) + lin,
        -xs / np.sqrt(1.0 - xs * xs) + lin,
        (2.0 * b3 + 1.0) * x - 1.0 + EX1_NU,
    ]
    return np.select(_secvi_conditions(x), branches)


def _secvi_conditions(x):
    # x = 0 belongs to the third branch; both give 0 there
    return [
        x <= -1.0,
        (x > -1.0) & (x < 0.0),
        (x >= 0.0) & (x < HALF_SQRT2),
        (x >= HALF_SQRT2) & (x < 1.0),
        x >= 1.0,
    ]


SECVI_BREAKPOINTS = (-1.0, 0.0, HALF_SQRT2, 1.0)


def secvi_lipschitz(b1, b2, b3) -> float:
    """Supremum of ``|f''|`` over the open branches.

    With ``b2 != 0`` the gradient also jumps at ``x = -1`` and no finite
    constant exists; the value returned then only covers the branch interiors.
    """
    c = 2.0 * b3
    return float(max(
        2.0 * abs(b1),
        12.0 * abs(b2),
        abs(1.0 + c),
        abs(2.0 * SQRT2 + c),
        abs(-2.0 * SQRT2 + c),
        abs(-_EX1_KINK + c),
    ))


# --------------------------------------------------------------------------
# local costs


class LocalCost:
    """Interface for one agent's cost: ``value``/``grad`` on ``(..., p)`` arrays."""

    p: int = 1
    lipschitz: float = 0.0
    breakpoints: tuple = ()

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class Quadratic(LocalCost):
    """``(weight/2) ||x - center||^2``."""

    center: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))

    @property
    def p(self):
        return self.center.size

    @property
    def lipschitz(self):
        return abs(self.weight)

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return 0.5 * self.weight * np.sum(d * d, axis=-1)

    def grad(self, x):
        return self.weight * (np.asarray(x, dtype=float) - self.center)


@dataclass(frozen=True)
class MatrixQuadratic(LocalCost):
    """``0.5 ||A x||^2``."""

    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))

    @property
    def p(self):
        return self.A.shape[1]

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.A.T @ self.A, 2))

    def value(self, x):
        ax = np.asarray(x, dtype=float) @ self.A.T
        return 0.5 * np.sum(ax * ax, axis=-1)

    def grad(self, x):
        return np.asarray(x, dtype=float) @ (self.A.T @ self.A).T


@dataclass(frozen=True)
class Quartic(LocalCost):
    """``scale * sum_j x_j^4``; no global Lipschitz gradient, used as an RSI counterexample."""

    scale: float = 1.0
    dim: int = 1

    @property
    def p(self):
        return self.dim

    @property
    def lipschitz(self):
        return float("inf")

    def value(self, x):
        return self.scale * np.sum(np.asarray(x, dtype=float) ** 4, axis=-1)

    def grad(self, x):
        return 4.0 * self.scale * np.asarray(x, dtype=float) ** 3


@dataclass(frozen=True)
class Zero(LocalCost):
    dim: int = 1

    @property
    def p(self):
        return self.dim

    def value(self, x):
        return np.zeros(np.shape(x)[:-1])

    def grad(self, x):
        return np.zeros(np.shape(x))


@dataclass(frozen=True)
class SecVI(LocalCost):
    """One agent of the piecewise scalar family, scaled by ``scale``."""

    b1: float = 0.0
    b2: float = 0.0
    b3: float = 0.0
    scale: float = 1.0
    breakpoints = SECVI_BREAKPOINTS

    @property
    def lipschitz(self):
        return abs(self.scale) * secvi_lipschitz(self.b1, self.b2, self.b3)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * secvi_value(x[..., 0], self.b1, self.b2, self.b3)

    def grad(self, x):
        return self.scale * secvi_grad(np.asarray(x, dtype=float), self.b1, self.b2, self.b3)


# --------------------------------------------------------------------------
# objective


@dataclass(frozen=True, eq=False)
class Objective:
    """A family of ``n`` local costs on R^p plus what is known about the optimum.

    ``nu`` is the RSI constant of the global cost ``f = sum_i f_i``;
    ``nu_estimated`` marks a value obtained by sampling rather than declared.
    """

    locals: tuple
    opt_set: object
    nu: float | None = None
    name: str = "custom"
    nu_estimated: bool = False
    nu_raw: float | None = None
    meta: dict = field(default_factory=dict)
    stacked_grad: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "locals", tuple(self.locals))
        if not self.locals:
            raise ValueError("objective needs at least one local cost")
        ps = {c.p for c in self.locals}
        if len(ps) != 1:
            raise ValueError(f"local costs disagree on dimension: {ps}")

    @property
    def n(self) -> int:
        return len(self.locals)

    @property
    def p(self) -> int:
        return self.locals[0].p

    @property
    def local_lipschitz(self) -> np.ndarray:
        return np.array([c.lipschitz for c in self.locals])

    @property
    def lipschitz(self) -> float:
        """L_f = max_i L_{f_i}."""
        return float(self.local_lipschitz.max())

    def value(self, x):
        """Global cost ``f(x) = sum_i f_i(x)`` at points of shape ``(..., p)``."""
        return sum(c.value(x) for c in self.locals)

    def grad(self, x):
        """Gradient of the global cost at points of shape ``(..., p)``."""
        return sum(c.grad(x) for c in self.locals)

    def grad_local(self, i: int, x):
        """Gradient of agent ``i``'s cost (0-based)."""
        return self.locals[i].grad(np.atleast_1d(np.asarray(x, dtype=float)))

    def value_stacked(self, X) -> float:
        X = as_stacked(X, self.n, self.p)
        return float(sum(c.value(X[i]) for i, c in enumerate(self.locals)))

    def grad_stacked(self, X) -> np.ndarray:
        """Block ``i`` is ``grad f_i(X[i])``; ``X`` has shape ``(n, p)``."""
        X = as_stacked(X, self.n, self.p)
        if self.stacked_grad is not None:
            return self.stacked_grad(X)
        return np.stack([c.grad(X[i]) for i, c in enumerate(self.locals)])

    def project_opt(self, x):
        return self.opt_set.project(x)

    def project_consensus_opt(self, X):
        """Projection of a stacked point onto ``{1 kron x* : x* in X*}``.

        Because the set lies in the consensus subspace, this is the projection
        of the block mean, replicated.
        """
        X = as_stacked(X, self.n, self.p)
        return np.tile(self.project_opt(X.mean(axis=0)), (self.n, 1))

    def with_nu(self, nu, estimated=False, raw=None) -> "Objective":
        return replace(self, nu=float(nu), nu_estimated=estimated, nu_raw=raw)


def as_stacked(X, n, p) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.size == n * p:
        X = X.reshape(n, p)
    if X.shape != (n, p):
        raise ValueError(f"stacked point must have shape ({n}, {p}), got {X.shape}")
    return X


# --------------------------------------------------------------------------
# builders


def make_quadratic(centers, weights=None) -> Objective:
    """``f_i = (a_i/2)||x - c_i||^2``; minimizer is the weighted mean of centers."""
    centers = np.asarray(centers, dtype=float)
    if centers.ndim == 1:
        centers = centers[:, None]
    n = centers.shape[0]
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if weights.shape != (n,) or np.any(weights <= 0):
        raise ValueError("weights must be n positive numbers")
    costs = [Quadratic(c, a) for c, a in zip(centers, weights)]
    xstar = weights @ centers / weights.sum()

    def stacked(X):
        return weights[:, None] * (X - centers)

    return Objective(costs, Singleton(xstar), nu=float(weights.sum()), name="quadratic",
                     meta={"centers": centers, "weights": weights}, stacked_grad=stacked)


def make_example1(n: int = 1) -> Objective:
    """The scalar non-convex example split evenly over ``n`` agents."""
    costs = [SecVI(scale=1.0 / n) for _ in range(n)]
    return Objective(costs, Box([-np.inf], [0.0]), nu=float(EX1_NU), name="example1")


def make_quartic(n: int = 1, p: int = 1) -> Objective:
    costs = [Quartic(1.0 / n, p) for _ in range(n)]
    return Objective(costs, Singleton(np.zeros(p)), nu=None, name="quartic")


def make_zero(n: int, p: int = 1, opt_set=None) -> Objective:
    """All-zero costs; every point is optimal unless ``opt_set`` says otherwise."""
    if opt_set is None:
        opt_set = Box(np.full(p, -np.inf), np.full(p, np.inf))
    return Objective([Zero(p) for _ in range(n)], opt_set, nu=None, name="zero")


@dataclass(frozen=True)
class SecVICoefficients:
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        for k in ("b1", "b2", "b3"):
            object.__setattr__(self, k, np.asarray(getattr(self, k), dtype=float))
        if not self.b1.sum() > 0:
            raise ValueError("sum of b1 must be positive")
        if abs(self.b2.sum()) > 1e-12 or abs(self.b3.sum()) > 1e-12:
            raise ValueError("b2 and b3 must each sum to zero")


def secvi_nu(coef: SecVICoefficients) -> float:
    return float(min(EX1_NU, 2.0 * coef.b1.sum()))


def make_secvi(n: int, seed: int = 0, b1=None, b2=None, b3=None, smooth: bool = False) -> Objective:
    """Random instance of the piecewise family with optimal set [-1, 0].

    Unspecified coefficients are drawn from a seeded generator: ``b1`` from
    U(0.05, 1) and ``b2``, ``b3`` from U(-1, 1) then centred so they sum to
    zero. ``smooth=True`` forces ``b2 = 0``, which makes every local cost C^1
    and the stacked gradient constant over the optimal set.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    draw1 = rng.uniform(0.05, 1.0, n)
    draw2 = rng.uniform(-1.0, 1.0, n)
    draw3 = rng.uniform(-1.0, 1.0, n)
    b1 = draw1 if b1 is None else np.asarray(b1, dtype=float)
    b2 = _centre(draw2) if b2 is None else np.asarray(b2, dtype=float)
    b3 = _centre(draw3) if b3 is None else np.asarray(b3, dtype=float)
    if smooth:
        b2 = np.zeros(n)
    coef = SecVICoefficients(b1, b2, b3)
    costs = [SecVI(*c) for c in zip(coef.b1, coef.b2, coef.b3)]

    def stacked(X):
        return secvi_grad(X, coef.b1[:, None], coef.b2[:, None], coef.b3[:, None])

    return Objective(costs, Box([-1.0], [0.0]), nu=secvi_nu(coef), name="secvi",
                     meta={"coefficients": coef, "seed": seed}, stacked_grad=stacked)


def _centre(b):
    b = b - b.mean()
    # push the rounding remainder onto one entry so the sum is ~0 to machine precision
    b[-1] -= b.sum()
    return b


# --------------------------------------------------------------------------
# numerical assumption checks


@dataclass(frozen=True)
class Sampler:
    """Seeded uniform sampler on the box ``[low, high]^p``."""

    count: int = 10_000
    low: float = -3.0
    high: float = 3.0
    seed: int = 0

    def draw(self, p: int, count: int | None = None, rng=None) -> np.ndarray:
        rng = np.random.default_rng(self.seed) if rng is None else rng
        return rng.uniform(self.low, self.high, size=(count or self.count, p))


@dataclass
class RSIReport:
    min_ratio: float
    nu: float | None
    passed: bool
    checked: int
    violating_points: np.ndarray
    argmin: np.ndarray | None = None


def rsi_ratios(obj: Objective, points) -> tuple[np.ndarray, np.ndarray]:
    """Secant ratio at each point outside X*; returns ``(ratios, points_used)``."""
    pts = np.asarray(points, dtype=float)
    proj = obj.project_opt(pts)
    d = pts - proj
    dist2 = np.sum(d * d, axis=-1)
    keep = dist2 > 0
    pts, proj, d, dist2 = pts[keep], proj[keep], d[keep], dist2[keep]
    num = np.sum((obj.grad(pts) - obj.grad(proj)) * d, axis=-1)
    return num / dist2, pts


def verify_rsi(obj: Objective, sampler: Sampler = Sampler(), nu: float | None = None) -> RSIReport:
    """Sample the restricted secant inequality of the global cost.

    Passes iff the smallest sampled ratio is at least ``nu - 1e-9``. ``nu``
    defaults to the objective's declared constant. Intended for small ``p``.
    """
    nu = obj.nu if nu is None else nu
    ratios, pts = rsi_ratios(obj, sampler.draw(obj.p))
    if ratios.size == 0:
        return RSIReport(float("inf"), nu, True, 0, np.empty((0, obj.p)))
    k = int(np.argmin(ratios))
    min_ratio = float(ratios[k])
    if nu is None:
        bad = np.empty((0, obj.p))
        passed = min_ratio > 0
    else:
        bad = pts[ratios < nu - 1e-9]
        passed = bad.shape[0] == 0
    return RSIReport(min_ratio, nu, passed, int(ratios.size), bad, pts[k])


def estimate_nu(obj: Objective, sampler: Sampler = Sampler(), safety: float = 0.9) -> Objective:
    """Objective with ``nu`` set to ``safety * min sampled ratio`` (flagged as estimated)."""
    report = verify_rsi(obj, sampler, nu=None)
    if not report.min_ratio > 0:
        raise ValueError(f"sampled secant ratio {report.min_ratio:g} is not positive; RSI fails")
    return obj.with_nu(safety * report.min_ratio, estimated=True, raw=report.min_ratio)


def check_gradient_singleton(obj: Objective, samples: Sequence) -> bool:
    """True iff the stacked gradient ``grad f~(1 kron x*)`` is the same at all samples.

    Each sample must be a minimizer (``||grad f|| <= 1e-8``).
    """
    grads = []
    for s in samples:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        gnorm = np.linalg.norm(obj.grad(s))
        if gnorm > GRAD_TOL:
            raise NotAMinimizer(f"||grad f({s})|| = {gnorm:g}")
        grads.append(obj.grad_stacked(np.tile(s, (obj.n, 1))))
    return all(np.linalg.norm(a - b) <= GRAD_TOL for i, a in enumerate(grads) for b in grads[i + 1:])


def estimate_lipschitz(obj: Objective, sampler: Sampler = Sampler(count=100_000)) -> np.ndarray:
    """Per-agent ``max ||grad f_i(a) - grad f_i(b)|| / ||a - b||`` over sampled pairs."""
    rng = np.random.default_rng(sampler.seed)
    a = sampler.draw(obj.p, rng=rng)
    b = sampler.draw(obj.p, rng=rng)
    dist = np.linalg.norm(a - b, axis=-1)
    keep = dist > 0
    a, b, dist = a[keep], b[keep], dist[keep]
    return np.array([np.max(np.linalg.norm(c.grad(a) - c.grad(b), axis=-1) / dist)
                     for c in obj.locals])


@dataclass
class GradientCheck:
    max_rel_error: float
    checked: int
    worst_point: np.ndarray | None
    worst_agent: int | None


def check_gradients(obj: Objective, sampler: Sampler = Sampler(count=1000), step: float = 1e-6,
                    exclude: float = 1e-4) -> GradientCheck:
    """Compare analytic gradients with central differences for every local cost.

    Error is ``|fd - g| / max(1, |g|)`` per coordinate; points within
    ``exclude`` of a cost's branch breakpoints are skipped.
    """
    pts = sampler.draw(obj.p)
    worst, worst_pt, worst_i, checked = 0.0, None, None, 0
    eye = np.eye(obj.p) * step
    for i, c in enumerate(obj.locals):
        use = pts
        if c.breakpoints:
            near = np.zeros(len(pts), dtype=bool)
            for b in c.breakpoints:
                near |= np.any(np.abs(pts - b) < exclude, axis=-1)
            use = pts[~near]
        g = c.grad(use)
        fd = np.stack([(c.value(use + e) - c.value(use - e)) / (2 * step) for e in eye], axis=-1)
        err = np.abs(fd - g) / np.maximum(1.0, np.abs(g))
        per_point = err.max(axis=-1)
        checked += len(use)
        if per_point.size and per_point.max() > worst:
            k = int(np.argmax(per_point))
            worst, worst_pt, worst_i = float(per_point[k]), use[k], i
    return GradientCheck(worst, checked, worst_pt, worst_i)
