"""Solver and derivative tests for the weighted point barycenter."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wbary import (
    BarycenterSolution,
    ConvergenceError,
    ValidationError,
    WeightedPointConfig,
    alpha_exponent,
    beta_exponent,
    curvature_blocks,
    dbary_dxi,
    el_residual,
    pbary_points,
    pbary_solve,
)


def test_weighted_mean_p2():
    z = pbary_points(np.array([[0.0], [1.0], [3.0]]), [0.2, 0.3, 0.5], 2.0)
    assert z.shape == (1,)
    assert z[0] == pytest.approx(1.8, abs=1e-15)


def test_two_point_closed_form_p3():
    # interpolation parameter w2^(1/(p-1)) / (w1^(1/(p-1)) + w2^(1/(p-1)))
    z = pbary_points(np.array([[0.0], [1.0]]), [0.25, 0.75], 3.0)
    expect = np.sqrt(3.0) / (1.0 + np.sqrt(3.0))
    assert z[0] == pytest.approx(expect, rel=1e-14)


def test_el_residual_worked_example():
    # two points at 1 and 2 with raw weights 1/3 each, p=3, z=0
    r = el_residual(np.array([[1.0], [2.0]]), [1 / 3, 1 / 3], 3.0,
                    np.array([0.0]))
    assert r[0] == pytest.approx(5.0 / 3.0, rel=1e-15)


def test_el_residual_continuous_limit_at_atom():
    """The term of a point coinciding with z vanishes for every p > 1."""
    pts = np.array([[0.0], [1.0]])
    for p in (1.5, 2.0, 3.0):
        r = el_residual(pts, [0.5, 0.5], p, np.array([0.0]))
        assert r[0] == pytest.approx(0.5, rel=1e-14)


def test_solution_meets_residual_criterion():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(5, 3))
    w = np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    for p in (1.5, 2.0, 2.5, 4.0):
        cfg = WeightedPointConfig(pts, w, p)
        sol = pbary_solve(cfg, tol=1e-12)
        assert isinstance(sol, BarycenterSolution)
        scale = w.max() * cfg.diameter ** (p - 1.0)
        assert sol.residual_norm <= 1e-12 * scale
        assert sol.converged


def test_batch_shapes():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(7, 4, 2))
    w = np.full(4, 0.25)
    z = pbary_points(pts, w, 3.0)
    assert z.shape == (7, 2)
    res = np.array([
        np.linalg.norm(el_residual(pts[k], w, 3.0, z[k])) for k in range(7)
    ])
    diam = np.linalg.norm(
        pts[:, :, None, :] - pts[:, None, :, :], axis=3
    ).max(axis=(1, 2))
    assert (res <= 1e-10 * 0.25 * diam ** 2).all()


def test_translation_and_scaling_equivariance():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(4, 2))
    w = np.array([0.4, 0.3, 0.2, 0.1])
    z = pbary_points(pts, w, 2.5)
    shift = np.array([3.0, -1.0])
    z_shift = pbary_points(pts + shift, w, 2.5)
    np.testing.assert_allclose(z_shift, z + shift, atol=1e-11)
    z_scaled = pbary_points(2.5 * pts, w, 2.5)
    np.testing.assert_allclose(z_scaled, 2.5 * z, atol=1e-11)


def test_rotation_equivariance():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(4, 2))
    w = np.array([0.4, 0.3, 0.2, 0.1])
    c, s = np.cos(0.7), np.sin(0.7)
    R = np.array([[c, -s], [s, c]])
    z = pbary_points(pts, w, 3.0)
    z_rot = pbary_points(pts @ R.T, w, 3.0)
    np.testing.assert_allclose(z_rot, R @ z, atol=1e-11)


def test_permutation_invariance():
    pts = np.array([[0.0, 0.0], [1.0, 0.5], [-0.5, 2.0]])
    w = np.array([0.5, 0.3, 0.2])
    perm = [2, 0, 1]
    z1 = pbary_points(pts, w, 2.5)
    z2 = pbary_points(pts[perm], w[perm], 2.5)
    np.testing.assert_allclose(z1, z2, atol=1e-12)


def test_gradients_sum_to_identity():
    pts = np.array([[0.3, -0.2], [1.0, 0.8], [-0.9, 0.4]])
    w = np.array([0.5, 0.25, 0.25])
    cfg = WeightedPointConfig(pts, w, 3.0)
    S = sum(dbary_dxi(cfg, i) for i in range(3))
    np.testing.assert_allclose(S, np.eye(2), atol=1e-12)


def test_curvature_blocks_symmetric_pair():
    """Two points at +-2 with equal weight, p=4: H_i = 6, Lambda_i = 3."""
    cfg = WeightedPointConfig(np.array([[-2.0], [2.0]]), [0.5, 0.5], 4.0)
    blocks = curvature_blocks(cfg, z=np.array([0.0]))
    np.testing.assert_allclose(blocks.H[0], [[6.0]], rtol=1e-14)
    np.testing.assert_allclose(blocks.Hbar, [[12.0]], rtol=1e-14)
    np.testing.assert_allclose(blocks.Lambda, [3.0, 3.0], rtol=1e-12)


def test_atom_locked_minimizer():
    """Symmetric p<2 case whose minimizer is exactly the middle atom."""
    cfg = WeightedPointConfig(
        np.array([[-1.0], [0.0], [1.0]]), [0.25, 0.5, 0.25], 1.5
    )
    sol = pbary_solve(cfg)
    assert sol.z[0] == 0.0
    assert sol.coincident_set == (1,)
    assert sol.residual_norm <= 1e-12


def test_all_points_equal():
    cfg = WeightedPointConfig(
        np.array([[1.0, 2.0]] * 3), [0.5, 0.3, 0.2], 2.5
    )
    sol = pbary_solve(cfg)
    np.testing.assert_allclose(sol.z, [1.0, 2.0])
    assert sol.coincident_set == (0, 1, 2)


def test_near_one_exponent_unreachable():
    """p close to 1 can need a step below the atom's float spacing.

    Here the minimizer sits about 1e-19 from the atom at 1.0 while the
    spacing of doubles near 1.0 is 2.2e-16, so no representable point can
    meet the tolerance and the solver must say so rather than return a
    bad point silently.
    """
    cfg = WeightedPointConfig(
        np.array([[1.0], [2.0], [3.0]]), [0.9, 0.07, 0.03], 1.05
    )
    with pytest.raises(ConvergenceError) as err:
        pbary_solve(cfg, tol=1e-12)
    assert err.value.best is not None
    assert err.value.residual is not None


def test_validation_errors():
    pts = np.array([[0.0], [1.0]])
    with pytest.raises(ValidationError):
        WeightedPointConfig(pts, [0.5, 0.6], 2.0)  # weights sum != 1
    with pytest.raises(ValidationError):
        WeightedPointConfig(pts, [1.0, 0.0], 2.0)  # nonpositive weight
    with pytest.raises(ValidationError):
        WeightedPointConfig(pts, [0.5, 0.5], 1.0)  # exponent at 1
    with pytest.raises(ValidationError):
        WeightedPointConfig(np.array([[np.nan], [1.0]]), [0.5, 0.5], 2.0)


def test_exponent_helpers():
    assert alpha_exponent(3.0) == pytest.approx(0.5)
    assert alpha_exponent(2.0) == 0.0
    assert beta_exponent(1.5) == pytest.approx(1.0)
    assert beta_exponent(1.2) == pytest.approx(4.0)
    for p in (1.3, 1.9, 2.4, 5.0):
        assert beta_exponent(p) == pytest.approx(-alpha_exponent(p))


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10**6),
    p=st.floats(1.3, 5.0),
    n=st.integers(2, 6),
    d=st.integers(1, 3),
)
def test_random_configs_solve_and_stay_in_box(seed, p, n, d):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, d))
    w = rng.uniform(0.2, 1.0, n)
    w = w / w.sum()
    cfg = WeightedPointConfig(pts, w, p)
    sol = pbary_solve(cfg, tol=1e-11)
    scale = w.max() * cfg.diameter ** (p - 1.0)
    assert sol.residual_norm <= 1e-11 * scale
    pad = 1e-9 * (1.0 + cfg.diameter)
    assert (sol.z >= pts.min(axis=0) - pad).all()
    assert (sol.z <= pts.max(axis=0) + pad).all()
