"""One-variable barycenter map, its inverse, eigenvalue bounds, pushforward."""

import numpy as np
import pytest

from wbary import (
    DiracConfiguration,
    InsufficientDataError,
    SingularPointError,
    ValidationError,
    b_forward,
    b_inverse,
    blowup_exponent,
    check_bounds_p_ge2,
    check_bounds_p_lt2,
    gbar,
    grad_b_inverse,
    grad_b_inverse_eigs,
    jacobian_det,
    lq_power_via_changevar,
    lq_via_changevar,
    pushforward_density,
    sharp_band_p_gt2,
    uniform_ball,
    uniform_box,
)

# Largest band constant observed for the reference p=3 configuration,
# inflated by 1.5x and frozen as a regression envelope.
SHARP_BAND_CONSTANT = 4.5


@pytest.fixture
def cfg_1d_p3():
    return DiracConfiguration(np.array([[1.0], [2.0]]), [1 / 3, 1 / 3, 1 / 3], 3.0)


@pytest.fixture
def cfg_2d_p3():
    return DiracConfiguration(
        np.array([[0.8, 0.1], [-0.7, -0.25]]), [0.4, 0.3, 0.3], 3.0
    )


def test_reduced_field_worked_example(cfg_1d_p3):
    g = gbar(cfg_1d_p3, np.array([0.0]))
    assert g[0] == pytest.approx(5.0 / 3.0, rel=1e-15)


def test_fixed_point_is_anchor_barycenter(cfg_1d_p3):
    assert cfg_1d_p3.fixed_point[0] == pytest.approx(1.5, abs=1e-12)
    z = cfg_1d_p3.fixed_point
    assert np.linalg.norm(gbar(cfg_1d_p3, z)) <= 1e-12


def test_inverse_map_closed_form(cfg_1d_p3):
    # b^{-1}(0) = 0 - lam1^(alpha-1) Gbar |Gbar|^(-alpha) = -sqrt(5)
    x = b_inverse(cfg_1d_p3, np.array([0.0]))
    assert x[0] == pytest.approx(-np.sqrt(5.0), rel=1e-14)


def test_inverse_gradient_closed_form(cfg_1d_p3):
    G = grad_b_inverse(cfg_1d_p3, np.array([0.0]))
    assert G[0, 0] == pytest.approx(1.0 + 3.0 / np.sqrt(5.0), rel=1e-13)
    ev = grad_b_inverse_eigs(cfg_1d_p3, np.array([0.0]))
    assert ev[0] == pytest.approx(1.0 + 3.0 / np.sqrt(5.0), rel=1e-13)


def test_forward_inverse_roundtrip(cfg_1d_p3):
    x1 = np.linspace(-3.0, 4.0, 41)[:, None]
    bx = b_forward(cfg_1d_p3, x1)
    np.testing.assert_allclose(b_inverse(cfg_1d_p3, bx), x1, atol=1e-10)


def test_modulus_identity(cfg_1d_p3):
    """lam1 |x1 - b(x1)|^(p-1) = |Gbar(b(x1))| along the map."""
    x1 = np.linspace(-2.0, 3.0, 21)[:, None]
    bx = b_forward(cfg_1d_p3, x1)
    lhs = cfg_1d_p3.lam1 * np.abs(x1.ravel() - bx.ravel()) ** 2
    rhs = np.abs(gbar(cfg_1d_p3, bx).ravel())
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_eigs_match_dense_eigensolve(cfg_2d_p3):
    rng = np.random.default_rng(4)
    zs = rng.uniform(-1.5, 1.5, (100, 2))
    zs = zs[np.linalg.norm(zs - cfg_2d_p3.fixed_point, axis=1) > 0.05]
    ev = grad_b_inverse_eigs(cfg_2d_p3, zs)
    dense = np.sort(np.linalg.eigvals(grad_b_inverse(cfg_2d_p3, zs)).real, axis=1)
    np.testing.assert_allclose(ev, dense, atol=1e-12)
    assert (ev > 0).all()


def test_two_anchor_gradient_is_constant():
    cfg = DiracConfiguration(np.array([[2.0, 1.0]]), [0.3, 0.7], 2.7)
    s = 1.0 / 1.7
    expect = (0.3 ** s + 0.7 ** s) / 0.3 ** s
    zs = np.random.default_rng(1).uniform(-2, 2, (20, 2))
    G = grad_b_inverse(cfg, zs)
    np.testing.assert_allclose(
        G, np.broadcast_to(expect * np.eye(2), G.shape), atol=1e-12
    )


def test_p2_gradient_is_identity_over_lam1():
    cfg = DiracConfiguration(np.array([[1.0, 0.0], [0.0, 1.0]]),
                             [0.4, 0.3, 0.3], 2.0)
    G = grad_b_inverse(cfg, np.array([0.3, -0.2]))
    np.testing.assert_allclose(G, np.eye(2) / 0.4, rtol=0, atol=0)
    J = jacobian_det(cfg, np.array([[0.3, -0.2]]))
    assert J[0] == pytest.approx(1.0 / 0.16, rel=1e-14)


def test_gradient_singularities():
    cfg3 = DiracConfiguration(np.array([[1.0], [2.0]]), [1 / 3] * 3, 3.0)
    with pytest.raises(SingularPointError):
        grad_b_inverse(cfg3, cfg3.fixed_point)
    cfg15 = DiracConfiguration(np.array([[1.0], [2.0]]), [1 / 3] * 3, 1.5)
    # p < 2: the gradient extends continuously by the identity at the fixed
    # point, while the field itself is singular at the anchors.
    G = grad_b_inverse(cfg15, cfg15.fixed_point)
    np.testing.assert_allclose(G, np.eye(1), atol=1e-12)
    with pytest.raises(SingularPointError):
        gbar(cfg15, np.array([1.0]))


def test_bounds_p_ge2_margins_nonnegative(cfg_2d_p3):
    rng = np.random.default_rng(7)
    zs = rng.uniform(-1.5, 1.5, (300, 2))
    zs = zs[np.linalg.norm(zs - cfg_2d_p3.fixed_point, axis=1) > 1e-6]
    rep = check_bounds_p_ge2(cfg_2d_p3, zs)
    assert rep.ok
    assert rep.lower_unit_margin >= -1e-9
    assert rep.lower_local_margin >= -1e-9
    assert rep.upper_local_margin >= -1e-9
    assert rep.upper_explicit_margin >= -1e-9


def test_bounds_p2_collapse_to_equality():
    cfg = DiracConfiguration(np.array([[0.8, 0.1], [-0.7, -0.25]]),
                             [0.4, 0.3, 0.3], 2.0)
    zs = np.random.default_rng(8).uniform(-1, 1, (50, 2))
    rep = check_bounds_p_ge2(cfg, zs)
    assert rep.lower_local_margin == pytest.approx(0.0, abs=1e-12)
    assert rep.upper_local_margin == pytest.approx(0.0, abs=1e-12)
    assert rep.upper_explicit_margin == pytest.approx(0.0, abs=1e-12)


def test_bounds_p_lt2_reference_point():
    """Frozen example: p=1.5, anchors (1,2), z=1.45 near the fixed point 1.5.

    The eigenvalue gap is 0.2010; the r^(2-p) lower envelope claims
    0.3333 there and fails, while the |Gbar|^beta local band brackets the
    gap as 0.1005 <= 0.2010 <= 0.4020.
    """
    cfg = DiracConfiguration(np.array([[1.0], [2.0]]), [1 / 3] * 3, 1.5)
    z = np.array([[1.45]])
    gap = float(grad_b_inverse_eigs(cfg, z).min() - 1.0)
    assert gap == pytest.approx(0.20100756, rel=1e-6)
    rep = check_bounds_p_lt2(cfg, z)
    assert rep.stated_lower_margin == pytest.approx(gap - 1.0 / 3.0, rel=1e-6)
    assert not rep.stated_ok
    assert rep.local_ok
    low = gap - rep.local_lower_margin
    high = gap + rep.local_upper_margin
    assert low == pytest.approx(0.10050378, rel=1e-6)
    assert high == pytest.approx(0.40201513, rel=1e-6)


def test_local_band_p_lt2_holds_broadly():
    for p in (1.2, 1.5, 1.8):
        cfg = DiracConfiguration(np.array([[1.0], [2.0]]), [1 / 3] * 3, p)
        zs = np.linspace(-1.0, 3.0, 401)[:, None]
        keep = np.ones(len(zs), bool)
        for s in [cfg.fixed_point, cfg.anchors[0], cfg.anchors[1]]:
            keep &= np.abs(zs - s[None, :]).ravel() > 1e-3
        rep = check_bounds_p_lt2(cfg, zs[keep])
        assert rep.local_ok, f"p={p}"


def test_sharp_band_p_gt2(cfg_2d_p3):
    """Scaled eigenvalues stay in a fixed band while raw ones diverge."""
    band = sharp_band_p_gt2(cfg_2d_p3, r_max=0.05)
    assert band.within(SHARP_BAND_CONSTANT)
    r_big = band.radii.max()
    r_small = band.radii.min()
    ev_big = grad_b_inverse_eigs(
        cfg_2d_p3, cfg_2d_p3.fixed_point + np.array([[r_big, 0.0]])
    ).max()
    ev_small = grad_b_inverse_eigs(
        cfg_2d_p3, cfg_2d_p3.fixed_point + np.array([[r_small, 0.0]])
    ).max()
    assert ev_small / ev_big > 50.0


def test_pushforward_mass(cfg_2d_p3):
    f1 = uniform_ball(np.array([0.2, 0.1]), 1.0 / np.sqrt(np.pi), resolution=96)
    pf = pushforward_density(cfg_2d_p3, f1, resolution=96)
    assert pf.mass_ok
    assert pf.mass == pytest.approx(1.0, abs=0.05)


def test_changevar_p2_identity():
    lam1 = 0.35
    cfg = DiracConfiguration(np.array([[1.0, 0.0], [0.0, 1.0]]),
                             [lam1, 0.35, 0.3], 2.0)
    f1 = uniform_ball(np.array([0.2, 0.1]), 1.0 / np.sqrt(np.pi), resolution=96)
    for q in (1.5, 2.0, 4.0):
        exact = lam1 ** (2 * (1 - q) / q) * f1.lq_norm(q)
        assert lq_via_changevar(cfg, f1, q) == pytest.approx(exact, rel=1e-12)
        assert lq_power_via_changevar(cfg, f1, q) == pytest.approx(
            exact ** q, rel=1e-12
        )


def test_blowup_exponents():
    cfg3 = DiracConfiguration(np.array([[0.8, 0.1], [-0.7, -0.25]]),
                              [0.4, 0.3, 0.3], 3.0)
    f1 = uniform_ball(np.array([0.2, 0.1]), 1.0 / np.sqrt(np.pi), resolution=128)
    rep = blowup_exponent(cfg3, f1, cfg3.fixed_point,
                          np.geomspace(1e-6, 1e-4, 10), q_values=(1.6, 2.4))
    assert rep.slope == pytest.approx(-1.0, abs=0.05)
    assert rep.q0 == pytest.approx(2.0, abs=0.1)
    assert rep.verdicts[1.6] and not rep.verdicts[2.4]

    cfg15 = DiracConfiguration(np.array([[0.1], [-0.3]]), [0.4, 0.3, 0.3], 1.5)
    f1d = uniform_box(np.array([[-0.5, 0.5]]), resolution=1024)
    rep2 = blowup_exponent(cfg15, f1d, np.array([0.1]),
                           np.geomspace(1e-8, 1e-6, 10))
    assert rep2.q0 == pytest.approx(2.0, abs=0.1)


def test_blowup_needs_radii_and_signal():
    cfg = DiracConfiguration(np.array([[1.0], [2.0]]), [1 / 3] * 3, 3.0)
    f1 = uniform_box(np.array([[-0.5, 0.5]]), resolution=64)
    with pytest.raises(ValidationError):
        blowup_exponent(cfg, f1, cfg.fixed_point, np.geomspace(1e-5, 1e-4, 3))
    # a center where the density vanishes yields no usable annuli
    with pytest.raises(InsufficientDataError):
        blowup_exponent(cfg, f1, np.array([50.0]),
                        np.geomspace(1e-5, 1e-4, 10))


def test_configuration_validation():
    with pytest.raises(ValidationError):
        DiracConfiguration(np.array([[1.0]]), [0.5, 0.6], 3.0)  # bad sum
    with pytest.raises(ValidationError):
        DiracConfiguration(np.array([[1.0]]), [0.5, 0.5], 1.0)  # p = 1
    with pytest.raises(ValidationError):
        DiracConfiguration(np.zeros((0, 1)), [1.0], 2.0)  # no anchors
