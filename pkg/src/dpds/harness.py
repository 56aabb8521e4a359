"""Experiment configuration, execution, rate fitting and persistence."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import discrete, dynamics, lyapunov
from .errors import InsufficientData, ParseError, ThresholdViolation, ValidationError
from .graph import Graph, build_graph, spectral
from .objective import (
    Objective,
    Sampler,
    check_gradients,
    estimate_nu,
    make_example1,
    make_quadratic,
    make_quartic,
    make_secvi,
    make_zero,
    verify_rsi,
)
from .rates import ProblemConstants, RateConstants, rate_constants
from .state import FlowParams, NetworkState, Trajectory

log = logging.getLogger(__name__)

GRAPH_KINDS = ("ring", "path", "complete", "star", "custom")
FAMILIES = ("secvi", "quadratic", "example1", "quartic", "zero")
MODES = ("dt", "ct", "ct-alt")
DEFAULT_WINDOW = (1e-10, 1e-2)


# --------------------------------------------------------------------------
# config


@dataclass
class GraphSpec:
    kind: str = "ring"
    n: int = 10
    weight: float = 1.0
    edges: list | None = None


@dataclass
class ObjectiveSpec:
    family: str = "secvi"
    n: int | None = None
    seed: int = 0
    smooth: bool = False
    b1: list | None = None
    b2: list | None = None
    b3: list | None = None
    centers: list | None = None
    weights: list | None = None
    p: int = 1
    nu: float | None = None


@dataclass
class AlgorithmSpec:
    mode: str = "dt"
    alpha: float = 10.0
    beta: float = 10.0
    h: float = 0.02
    iters: int = 5000
    dt: float = 1e-3
    T: float = 20.0
    integrator: str = "rk4"


@dataclass
class InitSpec:
    seed: int
    low: float = -3.0
    high: float = 3.0
    x0: list | None = None


@dataclass
class OutputSpec:
    record_every: int = 1
    lyapunov: bool = False
    agents: bool = False
    fit_window: list = field(default_factory=lambda: list(DEFAULT_WINDOW))


@dataclass
class ExperimentConfig:
    graph: GraphSpec
    objective: ObjectiveSpec
    algorithm: AlgorithmSpec
    init: InitSpec
    output: OutputSpec = field(default_factory=OutputSpec)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_SECTIONS = {"graph": GraphSpec, "objective": ObjectiveSpec, "algorithm": AlgorithmSpec,
             "init": InitSpec, "output": OutputSpec}


def _section(cls, data, name):
    if not isinstance(data, dict):
        raise ValidationError(name, "must be an object")
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ValidationError(f"{name}.{key}", "unknown key")
    kwargs = {}
    for key, f in known.items():
        if key in data:
            kwargs[key] = _coerce(data[key], f.type, f"{name}.{key}")
        elif f.default is MISSING and f.default_factory is MISSING:
            raise ValidationError(f"{name}.{key}", "required")
    return cls(**kwargs)


def _coerce(value, typ, where):
    typ = str(typ)
    if value is None:
        if "None" in typ:
            return None
        raise ValidationError(where, "must not be null")
    if typ.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(where, f"expected an integer, got {value!r}")
        return value
    if typ.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(where, f"expected a number, got {value!r}")
        return float(value)
    if typ == "bool":
        if not isinstance(value, bool):
            raise ValidationError(where, f"expected true/false, got {value!r}")
        return value
    if typ == "str":
        if not isinstance(value, str):
            raise ValidationError(where, f"expected a string, got {value!r}")
        return value
    if typ.startswith("list"):
        if not isinstance(value, list):
            raise ValidationError(where, f"expected a list, got {value!r}")
        return value
    return value


def config_from_dict(data: dict, env: dict | None = None) -> ExperimentConfig:
    """Validate a raw config mapping; ``DPDS_SEED`` in ``env`` overrides ``init.seed``."""
    env = os.environ if env is None else env
    if not isinstance(data, dict):
        raise ValidationError("<root>", "config must be a JSON object")
    for key in data:
        if key not in _SECTIONS:
            raise ValidationError(key, "unknown section")
    for key in ("graph", "objective", "algorithm"):
        if key not in data:
            raise ValidationError(key, "required section")
    init = dict(data.get("init") or {})
    if env.get("DPDS_SEED") not in (None, ""):
        try:
            init["seed"] = int(env["DPDS_SEED"])
        except ValueError:
            raise ValidationError("DPDS_SEED", "must be an integer") from None
    if "seed" not in init:
        raise ValidationError("init.seed", "required")

    cfg = ExperimentConfig(
        graph=_section(GraphSpec, data["graph"], "graph"),
        objective=_section(ObjectiveSpec, data["objective"], "objective"),
        algorithm=_section(AlgorithmSpec, data["algorithm"], "algorithm"),
        init=_section(InitSpec, init, "init"),
        output=_section(OutputSpec, data.get("output", {}), "output"),
    )
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    g, o, a, i, out = cfg.graph, cfg.objective, cfg.algorithm, cfg.init, cfg.output
    if g.kind not in GRAPH_KINDS:
        raise ValidationError("graph.kind", f"one of {GRAPH_KINDS}")
    if g.n < 1:
        raise ValidationError("graph.n", "must be >= 1")
    if not g.weight > 0:
        raise ValidationError("graph.weight", "must be positive")
    if g.kind == "custom" and g.edges is None:
        raise ValidationError("graph.edges", "required for a custom graph")
    if o.family not in FAMILIES:
        raise ValidationError("objective.family", f"one of {FAMILIES}")
    if o.n is not None and o.n != g.n:
        raise ValidationError("objective.n", f"must match graph.n = {g.n}")
    if o.family == "quadratic" and o.centers is None:
        raise ValidationError("objective.centers", "required for the quadratic family")
    if o.centers is not None and len(o.centers) != g.n:
        raise ValidationError("objective.centers", f"need one center per agent ({g.n})")
    if o.p < 1:
        raise ValidationError("objective.p", "must be >= 1")
    if o.nu is not None and not o.nu > 0:
        raise ValidationError("objective.nu", "must be positive")
    if a.mode not in MODES:
        raise ValidationError("algorithm.mode", f"one of {MODES}")
    for name in ("alpha", "beta", "h", "dt"):
        if not getattr(a, name) > 0:
            raise ValidationError(f"algorithm.{name}", "must be positive")
    if a.iters < 1:
        raise ValidationError("algorithm.iters", "must be >= 1")
    if not a.T >= a.dt:
        raise ValidationError("algorithm.T", "must be >= algorithm.dt")
    if a.integrator not in dynamics.STEPPERS:
        raise ValidationError("algorithm.integrator", f"one of {tuple(dynamics.STEPPERS)}")
    if not i.low < i.high:
        raise ValidationError("init.low", "must be below init.high")
    if out.record_every < 1:
        raise ValidationError("output.record_every", "must be >= 1")
    if len(out.fit_window) != 2 or not 0 < out.fit_window[0] < out.fit_window[1]:
        raise ValidationError("output.fit_window", "need [lo, hi] with 0 < lo < hi")


def load_config(path, env: dict | None = None) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    return config_from_dict(data, env)


# --------------------------------------------------------------------------
# building blocks from a config


def make_graph(spec: GraphSpec) -> Graph:
    return build_graph({"kind": spec.kind, "n": spec.n, "weight": spec.weight,
                        "edges": spec.edges or []})


def make_objective(spec: ObjectiveSpec, n: int) -> Objective:
    if spec.family == "secvi":
        obj = make_secvi(n, spec.seed, spec.b1, spec.b2, spec.b3, smooth=spec.smooth)
    elif spec.family == "quadratic":
        obj = make_quadratic(spec.centers, spec.weights)
    elif spec.family == "example1":
        obj = make_example1(n)
    elif spec.family == "quartic":
        obj = make_quartic(n, spec.p)
    else:
        obj = make_zero(n, spec.p)
    if spec.nu is not None:
        obj = obj.with_nu(spec.nu)
    return obj


def initial_state(spec: InitSpec, n: int, p: int) -> NetworkState:
    if spec.x0 is not None:
        x = np.asarray(spec.x0, dtype=float).reshape(n, p)
    else:
        x = np.random.default_rng(spec.seed).uniform(spec.low, spec.high, size=(n, p))
    return NetworkState.primal(x)


def problem_rates(graph: Graph, obj: Objective, alpha: float, beta: float) -> RateConstants | None:
    try:
        return rate_constants(ProblemConstants.from_problem(spectral(graph), obj, alpha, beta))
    except (ThresholdViolation, ValueError):
        return None


# --------------------------------------------------------------------------
# fitting


@dataclass
class RateFit:
    slope: float
    r_squared: float
    per_iter_factor: float
    window: tuple
    points: int


def fit_rate(series, window=DEFAULT_WINDOW, index=None) -> RateFit:
    """Least-squares line through ``log(series)`` against ``index`` inside the window.

    Only entries with ``lo <= value <= hi`` take part; at least 10 are needed.
    """
    r = np.asarray(series, dtype=float)
    idx = np.arange(len(r), dtype=float) if index is None else np.asarray(index, dtype=float)
    lo, hi = window
    mask = (r >= lo) & (r <= hi)
    if np.count_nonzero(mask) < 10:
        raise InsufficientData(f"{np.count_nonzero(mask)} points inside window {window}; need 10")
    k, y = idx[mask], np.log(r[mask])
    A = np.column_stack([k, np.ones_like(k)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - (slope * k + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return RateFit(float(slope), r2, float(np.exp(slope)), (lo, hi), int(mask.sum()))


# --------------------------------------------------------------------------
# running


@dataclass
class RunRecord:
    config_hash: str
    columns: list
    rows: list
    fit: RateFit | None = None
    rates: RateConstants | None = None
    trajectory: Trajectory | None = field(default=None, repr=False)

    def column(self, name) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows], dtype=float)

    def summary(self) -> dict:
        out = {"config_hash": self.config_hash, "rows": len(self.rows)}
        if self.rows:
            out["final_residual"] = self.rows[-1][self.columns.index("residual")]
        out["fit"] = None if self.fit is None else asdict(self.fit)
        out["rates"] = None if self.rates is None else self.rates.as_dict()
        return out


def run_trajectory(cfg: ExperimentConfig, graph=None, obj=None) -> Trajectory:
    graph = make_graph(cfg.graph) if graph is None else graph
    obj = make_objective(cfg.objective, graph.n) if obj is None else obj
    s0 = initial_state(cfg.init, graph.n, obj.p)
    a = cfg.algorithm
    params = FlowParams(a.alpha, a.beta)
    if a.mode == "dt":
        return discrete.run_dt(s0, params, a.h, graph, obj, a.iters, cfg.output.record_every)
    return dynamics.integrate(a.mode, s0, params, graph, obj, dt=a.dt, T=a.T,
                              method=a.integrator, record_every=cfg.output.record_every)


def run_experiment(cfg: ExperimentConfig) -> RunRecord:
    graph = make_graph(cfg.graph)
    obj = make_objective(cfg.objective, graph.n)
    a = cfg.algorithm
    traj = run_trajectory(cfg, graph, obj)
    rates = problem_rates(graph, obj, a.alpha, a.beta)

    xbar = traj.x.mean(axis=1)
    consensus = np.linalg.norm(traj.x - xbar[:, None, :], axis=2).max(axis=1)
    grad_norm = np.linalg.norm(obj.grad(xbar), axis=-1)
    residual = traj.residual

    columns = ["index"] + (["t"] if a.mode != "dt" else []) + ["residual", "consensus_error", "grad_norm"]
    series = [traj.steps] + ([traj.times] if a.mode != "dt" else []) + [residual, consensus, grad_norm]

    if cfg.output.lyapunov:
        columns += ["V1", "V2", "V3", "V"]
        ctx = lyapunov.context_for(graph, obj, FlowParams(a.alpha, a.beta))
        if ctx is None:
            log.warning("alpha below the threshold (or nu unknown); Lyapunov columns are NaN")
            series += [np.full(len(traj), np.nan)] * 4
        else:
            smp = lyapunov.evaluate_trajectory(ctx, traj)
            series += [np.array([getattr(s, k) for s in smp]) for k in ("V1", "V2", "V3", "V")]

    if cfg.output.agents:
        for name, arr in (("x", traj.x), ("v", traj.v)):
            for i in range(graph.n):
                for j in range(obj.p):
                    columns.append(f"{name}{i + 1}" if obj.p == 1 else f"{name}{i + 1}_{j + 1}")
                    series.append(arr[:, i, j])

    rows = [tuple(_cell(col[k]) for col in series) for k in range(len(traj))]
    try:
        fit = fit_rate(residual, tuple(cfg.output.fit_window), traj.steps)
    except InsufficientData as exc:
        log.info("no rate fit: %s", exc)
        fit = None
    return RunRecord(cfg.hash, columns, rows, fit, rates, traj)


def _cell(v):
    if isinstance(v, (np.integer, int)):
        return int(v)
    return float(v)


def write_csv(record: RunRecord, path) -> None:
    """Header row then one row per sample; floats at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(record.columns)
        for row in record.rows:
            w.writerow([c if isinstance(c, int) else format(c, ".17g") for c in row])


def write_meta(record: RunRecord, cfg: ExperimentConfig, path) -> None:
    meta = {"config": cfg.to_dict(), **record.summary()}
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n")


# --------------------------------------------------------------------------
# sweeps


def with_param(cfg: ExperimentConfig, param: str, value) -> ExperimentConfig:
    """Copy of ``cfg`` with ``section.key`` (or a bare algorithm key) replaced."""
    section, _, key = param.rpartition(".")
    section = section or "algorithm"
    data = cfg.to_dict()
    if section not in data or key not in data[section]:
        raise ValidationError(param, "unknown sweep parameter")
    data[section][key] = value
    return config_from_dict(data, env={})


def _sweep_one(cfg_dict, out_path):
    cfg = config_from_dict(cfg_dict, env={})
    rec = run_experiment(cfg)
    if out_path is not None:
        write_csv(rec, out_path)
    rec.trajectory = None
    return rec


def sweep(cfg: ExperimentConfig, param: str, values, out_dir=None, workers: int | None = None):
    """Run one experiment per value, concurrently; returns ``[(value, RunRecord)]``."""
    cfgs = [with_param(cfg, param, v) for v in values]
    paths = [None] * len(cfgs)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        paths = [Path(out_dir) / f"{param.replace('.', '_')}={v}.csv" for v in values]
    if workers == 1 or len(cfgs) == 1:
        recs = [_sweep_one(c.to_dict(), p) for c, p in zip(cfgs, paths)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(_sweep_one, [c.to_dict() for c in cfgs], paths))
    return list(zip(values, recs))


# --------------------------------------------------------------------------
# verification suites


@dataclass
class SuiteResult:
    suite: str
    passed: bool
    lines: list
    rows: list = field(default_factory=list)


def verify_suite(cfg: ExperimentConfig, suite: str) -> SuiteResult:
    graph = make_graph(cfg.graph)
    obj = make_objective(cfg.objective, graph.n)
    a = cfg.algorithm
    params = FlowParams(a.alpha, a.beta)

    if suite == "rsi":
        sampler = Sampler(10_000, cfg.init.low, cfg.init.high, cfg.init.seed)
        if obj.nu is None:
            obj = estimate_nu(obj, sampler)
        rep = verify_rsi(obj, sampler)
        return SuiteResult(suite, rep.passed, [
            f"nu = {obj.nu:.10g}{' (estimated)' if obj.nu_estimated else ''}",
            f"min sampled ratio = {rep.min_ratio:.10g} over {rep.checked} points",
            f"violations = {len(rep.violating_points)}"])

    if suite == "gradients":
        chk = check_gradients(obj, Sampler(1000, cfg.init.low, cfg.init.high, cfg.init.seed))
        ok = chk.max_rel_error <= 1e-6
        return SuiteResult(suite, ok, [f"max relative error = {chk.max_rel_error:.3e} "
                                       f"over {chk.checked} (agent, point) pairs"])

    if suite == "extra":
        K = min(a.iters, 100)
        s0 = initial_state(cfg.init, graph.n, obj.p)
        dev = discrete.verify_extra_equivalence(s0, params, a.h, graph, obj, K)
        return SuiteResult(suite, dev <= 1e-9, [f"max deviation over {K} iterations = {dev:.3e}"])

    if suite == "lyapunov":
        ctx = lyapunov.context_for(graph, obj, params)
        if ctx is None:
            return SuiteResult(suite, True, ["status: precondition-unmet (alpha below threshold)"])
        traj = run_trajectory(cfg, graph, obj)
        if a.mode == "dt":
            rep = lyapunov.check_dt_decay(ctx, traj)
        else:
            rep = lyapunov.check_ct_decay(ctx, traj)
        lines = [f"status: {rep.status}", f"worst margin = {rep.worst_margin:.3e} at {rep.worst_index}"]
        if rep.note:
            lines.append(rep.note)
        return SuiteResult(suite, rep.status != lyapunov.FAIL, lines, rep.rows())

    raise ValueError(f"unknown suite {suite!r}")
