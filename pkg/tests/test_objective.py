import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpds.errors import NotAMinimizer, UnsupportedOptSet
from dpds.objective import (
    EX1_NU,
    Box,
    MatrixQuadratic,
    Objective,
    Quadratic,
    SampleSet,
    Sampler,
    SecVICoefficients,
    Singleton,
    check_gradient_singleton,
    check_gradients,
    estimate_lipschitz,
    estimate_nu,
    make_example1,
    make_quadratic,
    make_quartic,
    make_secvi,
    secvi_grad,
    secvi_lipschitz,
    secvi_value,
    verify_rsi,
)


def test_example1_constant():
    assert EX1_NU == pytest.approx(np.sqrt((np.sqrt(2) - 1) / 2), abs=1e-15)


def test_secvi_grad_examples():
    b = (0.3, -0.7, 0.4)
    assert secvi_grad(0.0, *b) == 0.0
    assert secvi_grad(-2.0, *b) == pytest.approx(-2 * 0.3)


def test_quadratic_grad_at_center():
    obj = make_quadratic([[1.0, 2.0], [-1.0, 0.5]])
    np.testing.assert_allclose(obj.grad_local(0, [1.0, 2.0]), 0)


def test_stacked_gradient_examples():
    obj = make_quadratic([[0.0], [0.0]])
    np.testing.assert_allclose(obj.grad_stacked([[1.0], [-1.0]]), [[1.0], [-1.0]])
    q = make_quadratic([[-1.0], [2.0], [0.5]])
    xs = q.opt_set.point
    g = q.grad_stacked(np.tile(xs, (3, 1)))
    assert np.linalg.norm(g.sum(axis=0)) <= 1e-8
    s = make_secvi(10, seed=1)
    np.testing.assert_array_equal(s.grad_stacked(np.zeros((10, 1))), 0)


def test_stacked_fast_path_matches_locals():
    for obj in (make_secvi(6, seed=2), make_quadratic(np.random.default_rng(0).standard_normal((5, 2)))):
        X = np.random.default_rng(1).uniform(-3, 3, (obj.n, obj.p))
        slow = np.stack([obj.grad_local(i, X[i]) for i in range(obj.n)])
        np.testing.assert_allclose(obj.grad_stacked(X), slow, rtol=1e-13, atol=1e-13)


def test_box_projection_examples():
    box = Box([-1.0], [0.0])
    assert box.project(np.array([0.5]))[0] == 0.0
    assert box.project(np.array([-2.0]))[0] == -1.0
    assert np.array_equal(Singleton([3.0, 1.0]).project(np.array([7.0, 7.0])), [3.0, 1.0])


def test_consensus_projection_examples():
    obj = make_secvi(2, seed=0)
    np.testing.assert_array_equal(obj.project_consensus_opt([[0.5], [0.5]]), [[0], [0]])
    np.testing.assert_array_equal(obj.project_consensus_opt([[0.4], [-0.4]]), [[0], [0]])
    obj3 = make_secvi(3, seed=0)
    np.testing.assert_array_equal(obj3.project_consensus_opt([[-2.0]] * 3), [[-1], [-1], [-1]])


def test_consensus_projection_brute_force():
    # the nearest consensus point in 1 kron [-1, 0] found on a fine grid
    obj = make_secvi(3, seed=0)
    grid = np.linspace(-1, 0, 100_001)
    rng = np.random.default_rng(4)
    for _ in range(20):
        X = rng.uniform(-3, 3, (3, 1))
        d = ((X[:, 0][None, :] - grid[:, None]) ** 2).sum(axis=1)
        best = grid[np.argmin(d)]
        assert obj.project_consensus_opt(X)[0, 0] == pytest.approx(best, abs=2e-5)


def test_sample_set_projection_unsupported():
    with pytest.raises(UnsupportedOptSet):
        SampleSet([[0.0], [1.0]]).project(np.array([0.5]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2), st.lists(st.floats(-50, 50), min_size=2, max_size=2))
def test_box_projection_idempotent_nonexpansive(a, b):
    box = Box([-1.0, 0.0], [0.5, np.inf])
    a, b = np.array(a), np.array(b)
    pa, pb = box.project(a), box.project(b)
    np.testing.assert_array_equal(box.project(pa), pa)
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-12


def test_rsi_example1():
    rep = verify_rsi(make_example1(), Sampler(10_000, -3, 3, 0))
    assert rep.passed and rep.min_ratio >= EX1_NU - 1e-9


def test_rsi_half_square():
    obj = make_quadratic([[0.0]])
    rep = verify_rsi(obj, Sampler(1000))
    assert rep.min_ratio == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("nu", [1e-3, 0.01, 0.1, 1.0])
def test_rsi_quartic_fails(nu):
    assert not verify_rsi(make_quartic(), Sampler(10_000), nu=nu).passed


def test_estimate_nu_is_conservative():
    obj = estimate_nu(make_example1(), Sampler(5000))
    assert obj.nu_estimated
    assert obj.nu == pytest.approx(0.9 * obj.nu_raw)


def test_secvi_coefficients():
    for seed in range(20):
        c = make_secvi(10, seed=seed).meta["coefficients"]
        assert abs(c.b2.sum()) <= 1e-12 and abs(c.b3.sum()) <= 1e-12 and c.b1.sum() > 0
    with pytest.raises(ValueError):
        SecVICoefficients([1.0, 1.0], [0.5, 0.0], [0.0, 0.0])


def test_secvi_nu_and_opt_set():
    obj = make_secvi(10, seed=3)
    c = obj.meta["coefficients"]
    assert obj.nu == min(EX1_NU, 2 * c.b1.sum())
    assert obj.opt_set.lo[0] == -1.0 and obj.opt_set.hi[0] == 0.0
    small = make_secvi(2, b1=[0.01, 0.02], b2=[0, 0], b3=[0, 0])
    assert small.nu == pytest.approx(0.06)


def test_secvi_global_minimisers():
    obj = make_secvi(10, seed=5)
    for x in np.linspace(-1, 0, 11):
        assert abs(obj.grad(np.array([x]))[0]) <= 1e-12
    assert obj.value(np.array([-0.5])) == pytest.approx(obj.value(np.array([0.0])), abs=1e-12)
    assert obj.value(np.array([0.3])) > obj.value(np.array([0.0]))


def test_gradient_singleton_cases():
    assert check_gradient_singleton(make_quadratic([[1.0], [3.0]]), [[2.0]])
    smooth = make_secvi(10, seed=0, smooth=True)
    assert check_gradient_singleton(smooth, [[-1.0], [-0.5], [0.0]])
    rough = make_secvi(10, seed=0)
    assert not check_gradient_singleton(rough, [[-0.5], [0.0]])
    with pytest.raises(NotAMinimizer):
        check_gradient_singleton(rough, [[0.5]])


def test_lipschitz_estimates():
    obj = make_quadratic([[0.0]])
    assert estimate_lipschitz(obj, Sampler(1000))[0] == pytest.approx(1.0, abs=1e-9)
    A = Objective([MatrixQuadratic(np.diag([1.0, 2.0]))], Singleton([0.0, 0.0]), nu=1.0)
    assert estimate_lipschitz(A, Sampler(100_000))[0] == pytest.approx(4.0, abs=0.05)


def test_secvi_linear_tail_slope():
    b3 = 0.37
    x = np.array([1.5, 2.5])
    g = secvi_grad(x, 0.2, 0.1, b3)
    assert (g[1] - g[0]) / (x[1] - x[0]) == pytest.approx(2 * b3 + 1, abs=1e-12)


def test_secvi_lipschitz_bounds_sampled():
    for seed in range(5):
        obj = make_secvi(4, seed=seed, smooth=True)
        est = estimate_lipschitz(obj, Sampler(20_000, seed=seed))
        assert np.all(est <= obj.local_lipschitz + 1e-9)
    assert secvi_lipschitz(0.0, 0.0, 0.0) == pytest.approx(2 * np.sqrt(2))


def test_secvi_continuity_with_smooth_coefficients():
    # with b2 = 0 each local cost and its gradient are continuous at every breakpoint
    eps = 1e-9
    for b in (-1.0, 0.0, np.sqrt(0.5), 1.0):
        for coef in ((0.4, 0.0, 0.3), (0.9, 0.0, -0.6)):
            assert secvi_value(b - eps, *coef) == pytest.approx(secvi_value(b + eps, *coef), abs=1e-7)
            assert secvi_grad(b - eps, *coef) == pytest.approx(secvi_grad(b + eps, *coef), abs=1e-6)


@pytest.mark.parametrize("obj", [make_secvi(10, seed=0), make_example1(), make_quartic(2, 2),
                                 make_quadratic(np.arange(6.0).reshape(3, 2), [1.0, 2.0, 0.5])],
                         ids=["secvi", "example1", "quartic", "quadratic"])
def test_finite_difference_gradients(obj):
    chk = check_gradients(obj, Sampler(1000, seed=7))
    assert chk.max_rel_error <= 1e-6


def test_quadratic_weighted_minimiser():
    obj = make_quadratic([[0.0], [3.0]], weights=[1.0, 2.0])
    assert obj.opt_set.point[0] == pytest.approx(2.0)
    assert obj.nu == pytest.approx(3.0)
    assert isinstance(obj.locals[0], Quadratic)


def test_brute_force_secvi_opt_set():
    obj = make_secvi(10, seed=2)
    grid = np.linspace(-3, 3, 60_001)[:, None]
    vals = obj.value(grid)
    fmin = vals.min()
    argmins = grid[vals <= fmin + 1e-10, 0]
    assert argmins.min() == pytest.approx(-1.0, abs=1e-3)
    assert argmins.max() == pytest.approx(0.0, abs=1e-3)


def test_example1_split_sums_to_single():
    one, five = make_example1(1), make_example1(5)
    for x in itertools.product(np.linspace(-3, 3, 13)):
        x = np.array(x)
        assert five.value(x) == pytest.approx(one.value(x), abs=1e-12)
