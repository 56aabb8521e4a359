import json
import math

import numpy as np
import pytest

from conftest import CONFIGS
from dpds import harness
from dpds.errors import InsufficientData, ParseError, ValidationError
from dpds.graph import build_graph, spectral


def small(d, iters=200):
    d["algorithm"]["iters"] = iters
    return d


def test_checked_in_config_valid():
    cfg = harness.load_config(CONFIGS / "secvi_ring10.json", env={})
    assert (cfg.graph.kind, cfg.graph.n, cfg.algorithm.alpha, cfg.algorithm.beta, cfg.algorithm.h) == (
        "ring", 10, 10.0, 10.0, 0.02)


def test_negative_step_rejected(secvi_dict):
    secvi_dict["algorithm"]["h"] = -0.1
    with pytest.raises(ValidationError) as exc:
        harness.config_from_dict(secvi_dict, env={})
    assert exc.value.field == "algorithm.h"


def test_missing_seed_rejected(secvi_dict):
    del secvi_dict["init"]
    with pytest.raises(ValidationError) as exc:
        harness.config_from_dict(secvi_dict, env={})
    assert exc.value.field == "init.seed"


def test_seed_from_environment(secvi_dict):
    del secvi_dict["init"]
    cfg = harness.config_from_dict(secvi_dict, env={"DPDS_SEED": "11"})
    assert cfg.init.seed == 11


@pytest.mark.parametrize("patch", [
    {"graph": {"kind": "ring", "n": 10, "colour": "red"}},
    {"extra": {}},
    {"algorithm": {"mode": "warp"}},
    {"graph": {"kind": "ring", "n": "ten"}},
])
def test_bad_fields(secvi_dict, patch):
    secvi_dict.update(patch)
    with pytest.raises(ValidationError):
        harness.config_from_dict(secvi_dict, env={})


def test_parse_error_has_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "graph": {"kind": "ring"},\n  oops\n}\n')
    with pytest.raises(ParseError) as exc:
        harness.load_config(p, env={})
    assert exc.value.line == 3


def test_hash_changes_with_params(secvi_dict):
    a = harness.config_from_dict(secvi_dict, env={})
    b = harness.with_param(a, "h", 0.01)
    assert a.hash != b.hash
    assert a.hash == harness.config_from_dict(a.to_dict(), env={}).hash


def test_with_param_unknown(secvi_dict):
    cfg = harness.config_from_dict(secvi_dict, env={})
    with pytest.raises(ValidationError):
        harness.with_param(cfg, "gamma", 1.0)
    assert harness.with_param(cfg, "output.record_every", 5).output.record_every == 5


def test_minimal_csv_header(tmp_path, secvi_dict):
    rec = harness.run_experiment(harness.config_from_dict(small(secvi_dict), env={}))
    path = tmp_path / "r.csv"
    harness.write_csv(rec, path)
    lines = path.read_text().split("\n")
    assert lines[0] == "index,residual,consensus_error,grad_norm"
    assert len(lines) == 1 + 201 + 1  # trailing newline


def test_lyapunov_columns(secvi_dict):
    secvi_dict["output"] = {"lyapunov": True}
    rec = harness.run_experiment(harness.config_from_dict(small(secvi_dict), env={}))
    assert rec.columns[-4:] == ["V1", "V2", "V3", "V"]
    # alpha = 10 is below the sufficient threshold, so the columns are NaN
    assert np.all(np.isnan(rec.column("V")))


def test_lyapunov_columns_filled():
    cfg = harness.load_config(CONFIGS / "quadratic_ct.json", env={})
    rec = harness.run_experiment(cfg)
    V = rec.column("V")
    assert rec.columns[:2] == ["index", "t"]
    assert np.all(np.isfinite(V)) and V[-1] < V[0]


def test_empty_record(tmp_path):
    rec = harness.RunRecord("x", ["index", "residual", "consensus_error", "grad_norm"], [])
    harness.write_csv(rec, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "index,residual,consensus_error,grad_norm\n"


def test_runs_are_deterministic(tmp_path, secvi_dict):
    cfg = harness.config_from_dict(small(secvi_dict), env={})
    for name in ("a.csv", "b.csv"):
        harness.write_csv(harness.run_experiment(cfg), tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_meta_sidecar(tmp_path, secvi_dict):
    cfg = harness.config_from_dict(small(secvi_dict), env={})
    rec = harness.run_experiment(cfg)
    harness.write_meta(rec, cfg, tmp_path / "m.json")
    meta = json.loads((tmp_path / "m.json").read_text())
    assert meta["config_hash"] == cfg.hash and meta["config"]["init"]["seed"] == 4


def test_equilibrium_start_gives_zero_series():
    cfg = harness.config_from_dict({
        "graph": {"kind": "ring", "n": 5}, "objective": {"family": "zero"},
        "algorithm": {"mode": "dt", "alpha": 1, "beta": 1, "h": 0.1, "iters": 20},
        "init": {"seed": 0, "x0": [0.3] * 5}}, env={})
    rec = harness.run_experiment(cfg)
    for name in ("residual", "consensus_error", "grad_norm"):
        assert np.all(rec.column(name)[1:] == 0)


def _mode_radius(lam, h, alpha, beta):
    return max(abs(np.linalg.eigvals([[1 - h * alpha * lam, -h * beta], [h * beta * lam, 1.0]])))


def _consensus_run(alpha, beta, h, iters=3000):
    cfg = harness.config_from_dict({
        "graph": {"kind": "ring", "n": 8}, "objective": {"family": "zero"},
        "algorithm": {"mode": "dt", "alpha": alpha, "beta": beta, "h": h, "iters": iters},
        "init": {"seed": 3}}, env={})
    c = harness.run_experiment(cfg).column("consensus_error")
    return c / c[0]


def test_consensus_only_rate_matches_mode_analysis():
    h, alpha, beta = 0.05, 2.0, 1.0
    lams = spectral(build_graph(kind="ring", n=8)).lambda1
    predicted = max(_mode_radius(l, h, alpha, beta) for l in lams)
    fit = harness.fit_rate(_consensus_run(alpha, beta, h), (1e-10, 1e-2))
    assert fit.per_iter_factor == pytest.approx(predicted, abs=2e-3)


def test_consensus_only_rate_spectral_gap():
    # with a negligible dual gain the primal recursion is x+ = (I - h alpha L) x,
    # whose consensus error contracts by 1 - h alpha rho2 per step
    h, alpha = 0.05, 2.0
    rho2 = spectral(build_graph(kind="ring", n=8)).rho2
    fit = harness.fit_rate(_consensus_run(alpha, 1e-4, h), (1e-6, 1e-2))
    assert fit.per_iter_factor == pytest.approx(1 - h * alpha * rho2, abs=1e-4)


def test_fit_geometric():
    fit = harness.fit_rate(0.9 ** np.arange(300))
    assert fit.slope == pytest.approx(math.log(0.9), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_constant():
    fit = harness.fit_rate(np.full(50, 1e-4))
    assert fit.slope == pytest.approx(0.0, abs=1e-15)
    assert fit.per_iter_factor == pytest.approx(1.0, abs=1e-15)


def test_fit_insufficient():
    with pytest.raises(InsufficientData):
        harness.fit_rate(np.ones(50))


def test_secvi_run_factor_below_one(secvi_dict):
    rec = harness.run_experiment(harness.config_from_dict(secvi_dict, env={}))
    assert rec.fit.per_iter_factor < 1 and rec.fit.slope < 0


def test_compliant_run_at_least_as_fast_as_guarantee():
    cfg = harness.load_config(CONFIGS / "quadratic_dt.json", env={})
    rec = harness.run_experiment(cfg)
    assert cfg.algorithm.h < rec.rates.h_max
    assert rec.fit.per_iter_factor <= rec.rates.dt_rate(cfg.algorithm.h) + 1e-6


def test_sweep_parallel_matches_serial(tmp_path, secvi_dict):
    cfg = harness.config_from_dict(small(secvi_dict), env={})
    par = harness.sweep(cfg, "h", [0.01, 0.02], tmp_path, workers=2)
    ser = harness.sweep(cfg, "h", [0.01, 0.02], None, workers=1)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["h=0.01.csv", "h=0.02.csv"]
    for (_, a), (_, b) in zip(par, ser):
        assert a.rows == b.rows


@pytest.mark.parametrize("suite", ["rsi", "gradients", "extra"])
def test_suites_pass_on_secvi(secvi_dict, suite):
    res = harness.verify_suite(harness.config_from_dict(secvi_dict, env={}), suite)
    assert res.passed, res.lines


def test_lyapunov_suite_below_threshold_is_not_failure(secvi_dict):
    res = harness.verify_suite(harness.config_from_dict(small(secvi_dict), env={}), "lyapunov")
    assert res.passed and "precondition-unmet" in res.lines[0]


def test_quartic_rsi_suite_fails():
    cfg = harness.config_from_dict({
        "graph": {"kind": "complete", "n": 2}, "objective": {"family": "quartic", "nu": 0.01},
        "algorithm": {"mode": "dt"}, "init": {"seed": 0}}, env={})
    assert not harness.verify_suite(cfg, "rsi").passed
