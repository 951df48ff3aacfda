"""Support geometry, integrability bound, cell bound, injectivity."""

import numpy as np
import pytest
from scipy.optimize import minimize

from wbary import (
    DiscreteMeasure,
    GeometryError,
    ValidationError,
    compute_D,
    compute_geometry,
    compute_m,
    constant_maps,
    general_lq_bound,
    identity_maps,
    integrability_bound,
    local_injectivity_check,
    solve_mmot,
    uniform_ball,
    uniform_box,
)
from wbary.semidiscrete import DiracConfiguration, lq_via_changevar


def _objective_minimizer(pts, w, p):
    """Independent reference: minimize the power objective directly."""
    def f(z):
        return (w * np.linalg.norm(pts - z[None, :], axis=1) ** p).sum()
    best = None
    for x0 in [pts.mean(axis=0)] + list(pts):
        r = minimize(f, x0, method="Nelder-Mead",
                     options={"xatol": 1e-12, "fatol": 1e-14})
        if best is None or r.fun < best.fun:
            best = r
    return best.x


def test_separation_quantities_against_direct_minimization():
    """D and m for three Dirac marginals, cross-checked with a direct
    optimizer rather than the package's own solver."""
    measures = [
        DiscreteMeasure(np.array([[0.0, 0.0]]), [1.0]),
        DiscreteMeasure(np.array([[1.0, 0.0]]), [1.0]),
        DiscreteMeasure(np.array([[0.0, 1.0]]), [1.0]),
    ]
    w = np.array([0.4, 0.3, 0.3])
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    z_full = _objective_minimizer(pts, w, 3.0)
    z_red = np.array([0.5, 0.5])  # symmetric two-point reduced problem
    D = compute_D(measures, w, 3.0)
    m = compute_m(measures, w, 3.0)
    assert D == pytest.approx(np.linalg.norm(z_full - z_red), abs=1e-7)
    assert m == pytest.approx(
        np.linalg.norm(pts - z_full[None, :], axis=1).min(), abs=1e-7
    )
    geom = compute_geometry(measures, w, 3.0)
    assert geom.D == D and geom.m == m and geom.n_tuples == 1


def test_integrability_bound_p2_reduction():
    f1 = uniform_ball(np.array([0.2, 0.1]), 0.5, resolution=64)
    for q in (1.5, 2.0, 4.0):
        lam1 = 0.35
        b = integrability_bound(f1.lq_norm(q), q, 2.0, lam1, 2)
        assert b == pytest.approx(
            lam1 ** (2 * (1 - q) / q) * f1.lq_norm(q), rel=1e-12
        )


def test_integrability_requires_separation():
    # an atom of the first marginal exactly at the reduced barycenter
    # leaves the barycenter unmoved: D = 0 and the estimate is empty
    measures = [
        DiscreteMeasure(np.array([[0.5, 0.5]]), [1.0]),
        DiscreteMeasure(np.array([[1.0, 0.0]]), [1.0]),
        DiscreteMeasure(np.array([[0.0, 1.0]]), [1.0]),
    ]
    w = np.array([0.2, 0.4, 0.4])
    D = compute_D(measures, w, 2.0)
    assert D == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(GeometryError):
        integrability_bound(1.0, 2.0, 3.0, 0.2, 2, D=D)
    with pytest.raises(GeometryError):
        integrability_bound(1.0, 2.0, 1.5, 0.2, 2, m=0.0)


def test_general_bound_identity_reduction():
    f1 = uniform_ball(np.array([0.2, 0.1]), 0.5, resolution=64)
    rep = general_lq_bound(f1, identity_maps(2), np.array([0.4, 0.3, 0.3]),
                           2.0, 2.0)
    assert rep.value == pytest.approx(f1.lq_norm(2.0) ** 2, rel=1e-12)
    assert rep.n_cells_curved == 0
    assert not rep.diverging


def test_general_bound_dominates_measured():
    anchors = np.array([[0.8, 0.1], [-0.7, -0.25]])
    w = np.array([0.4, 0.3, 0.3])
    f1 = uniform_ball(np.array([0.2, 0.1]), 1.0 / np.sqrt(np.pi), resolution=96)
    for p, q in [(3.0, 1.6), (2.5, 1.8)]:
        cfg = DiracConfiguration(anchors, w, p)
        measured = lq_via_changevar(cfg, f1, q) ** q
        rep = general_lq_bound(f1, constant_maps(anchors), w, p, q)
        assert rep.dominates(measured)


def test_general_bound_degenerates_with_anchor_in_support():
    """p < 2 with an anchor inside the support: curvature blows up near the
    anchor cells, so the bound stays valid but grows without settling as
    the grid refines (roughly x8 per doubling here)."""
    anchors = np.array([[0.1], [-0.3]])
    w = np.array([0.4, 0.3, 0.3])
    values = []
    for res in (128, 256, 512):
        f1 = uniform_box(np.array([[-0.5, 0.5]]), resolution=res)
        rep = general_lq_bound(f1, constant_maps(anchors), w, 1.5, 2.5)
        values.append(rep.value)
    assert values[1] > 4.0 * values[0]
    assert values[2] > 4.0 * values[1]


def test_injectivity_on_plan_supports():
    for t in range(6):
        rng = np.random.default_rng(600 + t)
        measures = [
            DiscreteMeasure(rng.normal(size=(3, 2)), np.full(3, 1 / 3))
            for _ in range(2)
        ]
        w = np.array([0.5, 0.5])
        plan = solve_mmot(measures, w, 2.5)
        rep = local_injectivity_check(plan.points, w, 2.5)
        assert rep.ok


def test_injectivity_nonvacuous_on_clustered_tuples():
    rng = np.random.default_rng(9)
    base = rng.normal(size=(1, 3, 2))
    pts = base + 1e-3 * rng.normal(size=(30, 3, 2))
    rep = local_injectivity_check(pts, np.array([0.5, 0.3, 0.2]), 2.5)
    assert rep.ok
    assert rep.n_checked_bases == 30
    assert rep.vacuous_bases < 30


def test_injectivity_validation():
    with pytest.raises(ValidationError):
        local_injectivity_check(np.zeros((3, 2)), np.array([0.5, 0.5]), 2.0)
