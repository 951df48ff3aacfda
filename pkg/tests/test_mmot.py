"""Multi-marginal transport: LP solutions, equivalence, duals, monotonicity."""

from itertools import permutations

import numpy as np
import pytest

from wbary import (
    DiscreteMeasure,
    ValidationError,
    barycenter_measure,
    check_cp_monotone,
    cost_tensor,
    dual_check_potentials,
    pbary_points,
    solve_mmot,
    verify_c2m_equivalence,
    wp_distance,
)
from wbary.mmot import _pair_lp


def test_measure_validation_and_merging():
    m = DiscreteMeasure(np.array([[0.0], [1.0], [1.0 + 1e-15]]),
                        [0.5, 0.25, 0.25])
    assert m.n_atoms == 2  # indistinguishable atoms merge, masses add
    assert m.masses.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValidationError):
        DiscreteMeasure(np.array([[0.0]]), [0.5])  # mass deficit
    with pytest.raises(ValidationError):
        DiscreteMeasure(np.array([[0.0], [1.0]]), [1.5, -0.5])


def test_measure_drops_zero_mass():
    m = DiscreteMeasure(np.array([[0.0], [1.0]]), [1.0, 0.0])
    assert m.n_atoms == 1


def test_cost_tensor_two_diracs():
    """c(x1, x2) = min_z sum w_i |x_i - z|^p: two unit points at 0 and 1."""
    m1 = DiscreteMeasure(np.array([[0.0]]), [1.0])
    m2 = DiscreteMeasure(np.array([[1.0]]), [1.0])
    ct = cost_tensor([m1, m2], np.array([0.5, 0.5]), 2.0)
    assert ct.values.shape == (1, 1)
    assert ct.values[0, 0] == pytest.approx(0.25, rel=1e-12)
    assert ct.barycenters[0, 0] == pytest.approx(0.5, rel=1e-12)


def test_mmot_monotone_rearrangement_1d():
    """Equal-mass 1-d marginals couple monotonically.

    Pairing (0, 0.2) and (1, 0.9) gives tuple costs 0.01 and 0.0025 at
    barycenters 0.1 and 0.95, so the optimum is 0.00625.
    """
    a = DiscreteMeasure(np.array([[0.0], [1.0]]), [0.5, 0.5])
    b = DiscreteMeasure(np.array([[0.2], [0.9]]), [0.5, 0.5])
    plan = solve_mmot([a, b], np.array([0.5, 0.5]), 2.0)
    assert plan.objective == pytest.approx(0.00625, rel=1e-12)
    np.testing.assert_allclose(np.sort(plan.barycenters.ravel()), [0.1, 0.95],
                               atol=1e-12)


def test_mmot_matches_permutation_enumeration():
    """Uniform equal-size marginals: the LP optimum over couplings equals
    the best assignment, found here by brute force over permutations."""
    rng = np.random.default_rng(12)
    for p in (1.5, 2.0, 3.0):
        A = rng.normal(size=(3, 2))
        B = rng.normal(size=(3, 2))
        mA = DiscreteMeasure(A, np.full(3, 1 / 3))
        mB = DiscreteMeasure(B, np.full(3, 1 / 3))
        w = np.array([0.6, 0.4])
        plan = solve_mmot([mA, mB], w, p)
        best = np.inf
        for perm in permutations(range(3)):
            pts = np.stack([A, B[list(perm)]], axis=1)  # (3, 2, 2)
            z = pbary_points(pts, w, p)
            cost = (
                w[None, :] * np.linalg.norm(pts - z[:, None, :], axis=2) ** p
            ).sum() / 3.0
            best = min(best, cost)
        assert plan.objective == pytest.approx(best, rel=1e-10)


def test_support_sparsity_and_marginals():
    rng = np.random.default_rng(21)
    for _ in range(8):
        measures = []
        for _ in range(3):
            K = int(rng.integers(2, 5))
            masses = rng.uniform(0.2, 1.0, K)
            measures.append(
                DiscreteMeasure(rng.normal(size=(K, 2)), masses / masses.sum())
            )
        w = rng.uniform(0.2, 1.0, 3)
        plan = solve_mmot(measures, w / w.sum(), 2.0)
        basis = sum(m.n_atoms for m in measures) - 3 + 1
        assert len(plan.masses) <= basis
        assert plan.support_within_basis
        assert plan.marginal_residual <= 1e-9


def test_wp_distance_diracs():
    m0 = DiscreteMeasure(np.array([[0.0]]), [1.0])
    m1 = DiscreteMeasure(np.array([[1.0]]), [1.0])
    for p in (1.5, 2.0, 3.0):
        assert wp_distance(m0, m1, p) == pytest.approx(1.0, rel=1e-12)
    assert wp_distance(m0, m0, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_pair_lp_duals_certify_optimum():
    """Dual feasibility phi_j + psi_k <= c_jk, zero slack on the support,
    and dual objective equal to the primal: an optimality certificate."""
    mu = DiscreteMeasure(np.array([[0.0], [1.0]]), [0.5, 0.5])
    nu = DiscreteMeasure(np.array([[2.0], [3.0]]), [0.5, 0.5])
    cost = (mu.atoms[:, None, 0] - nu.atoms[None, :, 0]) ** 2
    value, plan, phi, psi, _ = _pair_lp(mu, nu, cost)
    assert value == pytest.approx(4.0, rel=1e-12)
    assert phi @ mu.masses + psi @ nu.masses == pytest.approx(value, rel=1e-10)
    slack = cost - phi[:, None] - psi[None, :]
    assert slack.min() >= -1e-9
    assert np.abs(slack[plan > 1e-12]).max() <= 1e-9


def test_equivalence_on_seeded_instance():
    rng = np.random.default_rng(3)
    measures = []
    for K in (3, 2, 4):
        pts = rng.normal(size=(K, 2))
        m = rng.uniform(0.2, 1.0, K)
        measures.append(DiscreteMeasure(pts, m / m.sum()))
    w = np.array([0.5, 0.25, 0.25])
    for p in (1.5, 2.0, 3.0):
        rep = verify_c2m_equivalence(measures, w, p)
        assert rep.ok
        assert rep.gap <= 1e-10 * (1.0 + rep.mmot_value)


def test_barycenter_measure_mass():
    a = DiscreteMeasure(np.array([[0.0], [1.0]]), [0.5, 0.5])
    b = DiscreteMeasure(np.array([[0.25], [0.75]]), [0.5, 0.5])
    plan = solve_mmot([a, b], np.array([0.5, 0.5]), 2.0)
    nu = barycenter_measure(plan)
    assert nu.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert nu.n_atoms <= len(plan.masses)


def test_monotonicity_detects_crossing():
    crossed = np.array([[[0.0], [1.0]], [[1.0], [0.0]]])
    rep = check_cp_monotone(crossed, weights=np.array([0.5, 0.5]), p=2.0)
    assert not rep.ok
    # swapping the second coordinates gives tuples (0,0) and (1,1), saving
    # the full 2 x 0.25 barycenter cost
    assert rep.min_margin == pytest.approx(-0.5, rel=1e-12)


def test_monotonicity_passes_optimal():
    rng = np.random.default_rng(77)
    measures = [
        DiscreteMeasure(rng.normal(size=(3, 1)), np.full(3, 1 / 3))
        for _ in range(2)
    ]
    plan = solve_mmot(measures, np.array([0.5, 0.5]), 3.0)
    rep = check_cp_monotone(plan)
    assert rep.ok


def test_dual_potentials_shift_invariance():
    """Per-component shifts absorb the matching ambiguity; the shifted
    weighted sum of pair potentials is constant across the barycenter
    support (or flagged degenerate when the plan graph is disconnected)."""
    rng = np.random.default_rng(9)
    measures = []
    for K in (3, 2, 4):
        pts = rng.normal(size=(K, 2))
        m = rng.uniform(0.2, 1.0, K)
        measures.append(DiscreteMeasure(pts, m / m.sum()))
    w = np.array([0.5, 0.25, 0.25])
    rep = dual_check_potentials(measures, w, 2.0)
    assert rep.feasibility_violation <= 1e-9
    assert rep.variance_shifted <= 1e-12 or rep.degenerate
    assert rep.variance_shifted <= rep.variance_raw + 1e-15


def test_family_validation():
    m = DiscreteMeasure(np.array([[0.0]]), [1.0])
    m2 = DiscreteMeasure(np.array([[0.0, 1.0]]), [1.0])
    with pytest.raises(ValidationError):
        solve_mmot([m, m2], np.array([0.5, 0.5]), 2.0)  # dim mismatch
    with pytest.raises(ValidationError):
        solve_mmot([m], np.array([1.0]), 2.0)  # needs >= 2 marginals
