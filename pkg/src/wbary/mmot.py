"""Multi-marginal optimal transport between discrete measures.

The multi-marginal problem couples N discrete probability measures through
the barycentric cost

    c(x_1, ..., x_N) = sum_i w_i |x_i - bary(x)|^p,

with bary the weighted p-barycenter of the tuple.  Its optimal value equals
the p-Wasserstein barycenter problem: pushing an optimal coupling forward
through the barycenter map yields a measure nu with

    C_MM = sum_i w_i W_p^p(mu_i, nu),

which is what verify_c2m_equivalence checks numerically.  All linear
programs are solved with scipy's HiGHS dual simplex, which returns vertex
solutions (sparse supports) and the equality-constraint duals used by the
potential probe.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components

from .core import _check_exponent, pbary_points
from .errors import ConvergenceError, ValidationError

_MASS_TOL = 1e-12
_SPARSITY_TOL = 1e-11
_DEFAULT_CAP = 10 ** 6


@dataclass(eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure.

    atoms : (K, d), distinct after ingestion (near-duplicates are merged and
        their masses added); zero-mass atoms are dropped
    masses : (K,) nonnegative, summing to one within 1e-12
    """

    atoms: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        masses = np.asarray(self.masses, dtype=float).ravel()
        if atoms.ndim != 2 or atoms.shape[0] != masses.shape[0]:
            raise ValidationError(
                f"atoms {atoms.shape} and masses {masses.shape} do not match"
            )
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(masses)):
            raise ValidationError("atoms/masses contain non-finite entries")
        if np.any(masses < 0):
            raise ValidationError("masses must be nonnegative")
        if abs(masses.sum() - 1.0) > _MASS_TOL:
            raise ValidationError(
                f"masses must sum to 1 within {_MASS_TOL}, got {masses.sum()!r}"
            )
        keep = masses > 0.0
        atoms, masses = atoms[keep], masses[keep]
        if atoms.shape[0] == 0:
            raise ValidationError("measure has no atoms with positive mass")
        atoms, masses = _merge_close(atoms, masses, _merge_scale(atoms))
        self.atoms = atoms
        self.masses = masses

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "masses": self.masses.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteMeasure":
        return cls(np.asarray(data["atoms"]), np.asarray(data["masses"]))


def _merge_scale(atoms: np.ndarray) -> float:
    if atoms.shape[0] < 2:
        return 1e-12
    span = atoms.max(axis=0) - atoms.min(axis=0)
    return 1e-12 * max(1.0, float(np.linalg.norm(span)))


def _merge_close(atoms, masses, tol):
    """Merge atoms whose lexicographic neighbors lie within tol (Euclidean)."""
    order = np.lexsort(atoms.T[::-1])
    atoms, masses = atoms[order], masses[order]
    out_a, out_m = [atoms[0]], [masses[0]]
    for a, m in zip(atoms[1:], masses[1:]):
        if np.linalg.norm(a - out_a[-1]) <= tol:
            w = out_m[-1] + m
            out_a[-1] = (out_m[-1] * out_a[-1] + m * a) / w
            out_m[-1] = w
        else:
            out_a.append(a)
            out_m.append(m)
    return np.array(out_a), np.array(out_m)


def _check_family(measures, weights, p):
    p = _check_exponent(p)
    if len(measures) < 2:
        raise ValidationError("need at least two marginals")
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != len(measures):
        raise ValidationError("one weight per marginal required")
    if np.any(w <= 0) or abs(w.sum() - 1.0) > _MASS_TOL:
        raise ValidationError("weights must be positive and sum to 1")
    d = measures[0].dim
    for mu in measures:
        if mu.dim != d:
            raise ValidationError("marginals live in different dimensions")
    return w, p, d


@dataclass(eq=False)
class CostTensor:
    """Barycentric cost over the product of marginal supports.

    values : array of shape (K_1, ..., K_N)
    barycenters : array of shape (K_1, ..., K_N, d), cached for reuse
    """

    values: np.ndarray
    barycenters: np.ndarray
    weights: np.ndarray
    p: float


def cost_tensor(measures, weights, p, cap=_DEFAULT_CAP) -> CostTensor:
    """Evaluate c(x_1..x_N) and the barycenters on the full support product."""
    w, p, d = _check_family(measures, weights, p)
    shape = tuple(mu.n_atoms for mu in measures)
    total = int(np.prod(shape))
    if total > cap:
        raise ValidationError(
            f"product support size {total} exceeds cap {cap}"
        )
    idx = np.indices(shape).reshape(len(shape), -1).T  # (total, N)
    pts = np.stack(
        [measures[i].atoms[idx[:, i]] for i in range(len(measures))], axis=1
    )  # (total, N, d)
    z = pbary_points(pts, w, p)
    cost = (w[None, :] * np.linalg.norm(pts - z[:, None, :], axis=2) ** p).sum(axis=1)
    return CostTensor(
        values=cost.reshape(shape),
        barycenters=z.reshape(shape + (d,)),
        weights=w,
        p=p,
    )


@dataclass(eq=False)
class TransportPlan:
    """Sparse optimal coupling of an MMOT instance.

    indices : (n, N) integer multi-indices into the marginal supports
    masses : (n,) positive masses of the coupling atoms
    points : (n, N, d) the coupled support tuples
    barycenters : (n, d) p-barycenters of the tuples
    objective : optimal cost value
    marginal_residual : worst absolute marginal mismatch of the plan
    support_within_basis : whether n <= sum K_i - N + 1 (vertex sparsity)
    maybe_degenerate : True when zero-reduced-cost nonbasic variables exist,
        i.e. the optimal plan may not be unique
    """

    indices: np.ndarray
    masses: np.ndarray
    points: np.ndarray
    barycenters: np.ndarray
    objective: float
    weights: np.ndarray
    p: float
    measures: tuple
    marginal_residual: float
    support_within_basis: bool
    maybe_degenerate: bool

    @property
    def n_entries(self) -> int:
        return self.masses.shape[0]


def _marginal_matrix(shape):
    """Equality-constraint matrix mapping a flattened plan to its marginals."""
    total = int(np.prod(shape))
    idx = np.indices(shape).reshape(len(shape), -1)  # (N, total)
    rows, cols = [], []
    offset = 0
    for i, k in enumerate(shape):
        rows.append(offset + idx[i])
        cols.append(np.arange(total))
        offset += k
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.ones(rows.shape[0])
    return sp.coo_matrix((data, (rows, cols)), shape=(offset, total)).tocsr()


def solve_mmot(measures, weights, p, cap=_DEFAULT_CAP,
               cost: CostTensor | None = None) -> TransportPlan:
    """Solve the multi-marginal problem to LP optimality (HiGHS dual simplex)."""
    w, p, d = _check_family(measures, weights, p)
    if cost is None:
        cost = cost_tensor(measures, weights, p, cap=cap)
    shape = cost.values.shape
    total = int(np.prod(shape))
    c = cost.values.ravel()
    A = _marginal_matrix(shape)
    b = np.concatenate([mu.masses for mu in measures])
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise ConvergenceError(f"MMOT LP failed: {res.message}")
    x = np.maximum(res.x, 0.0)
    support = x > _SPARSITY_TOL
    flat = np.where(support)[0]
    indices = np.stack(np.unravel_index(flat, shape), axis=-1)
    masses = x[flat]
    pts = np.stack(
        [measures[i].atoms[indices[:, i]] for i in range(len(measures))], axis=1
    )
    barys = cost.barycenters.reshape(total, d)[flat]
    marg = A @ x
    residual = float(np.abs(marg - b).max())
    basis_bound = int(sum(shape)) - len(shape) + 1
    # Uniqueness probe through reduced costs of nonbasic variables.
    y = res.eqlin.marginals
    rc = c - A.T @ y
    slack_zero = (~support) & (np.abs(rc) <= 1e-9 * (1.0 + np.abs(c).max()))
    return TransportPlan(
        indices=indices,
        masses=masses,
        points=pts,
        barycenters=barys,
        objective=float(res.fun),
        weights=w,
        p=p,
        measures=tuple(measures),
        marginal_residual=residual,
        support_within_basis=bool(len(flat) <= basis_bound),
        maybe_degenerate=bool(slack_zero.any()),
    )


def barycenter_measure(plan: TransportPlan, merge_tol=None) -> DiscreteMeasure:
    """Pushforward of the plan through the barycenter map, atoms merged.

    Barycenter points closer than merge_tol (default 1e-9 times the overall
    support diameter) are merged with mass-weighted positions.  Masses are
    renormalized to absorb the LP feasibility residual (<= 1e-9).
    """
    if merge_tol is None:
        allpts = np.vstack([mu.atoms for mu in plan.measures])
        span = allpts.max(axis=0) - allpts.min(axis=0)
        merge_tol = 1e-9 * max(1.0, float(np.linalg.norm(span)))
    atoms, masses = _merge_close(plan.barycenters, plan.masses, merge_tol)
    return DiscreteMeasure(atoms, masses / masses.sum())


def _pair_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, costmat: np.ndarray):
    """Two-marginal transport LP; returns value, plan, duals, degeneracy flag."""
    km, kn = costmat.shape
    A = sp.vstack(
        [
            sp.kron(sp.eye(km), np.ones((1, kn))),
            sp.kron(np.ones((1, km)), sp.eye(kn)),
        ]
    ).tocsr()
    b = np.concatenate([mu.masses, nu.masses])
    res = linprog(costmat.ravel(), A_eq=A, b_eq=b, bounds=(0, None),
                  method="highs-ds")
    if res.status != 0:
        raise ConvergenceError(f"pair transport LP failed: {res.message}")
    x = np.maximum(res.x, 0.0).reshape(km, kn)
    y = res.eqlin.marginals
    phi, psi = y[:km], y[km:]
    rc = costmat.ravel() - A.T @ y
    nonbasic_zero = (res.x <= _SPARSITY_TOL) & (
        np.abs(rc) <= 1e-9 * (1.0 + np.abs(costmat).max())
    )
    return float(res.fun), x, phi, psi, bool(nonbasic_zero.any())


def wp_distance(mu: DiscreteMeasure, nu: DiscreteMeasure, p,
                cap=_DEFAULT_CAP) -> float:
    """p-Wasserstein distance between discrete measures (exact LP)."""
    p = _check_exponent(p)
    if mu.dim != nu.dim:
        raise ValidationError("measures live in different dimensions")
    if mu.n_atoms * nu.n_atoms > cap:
        raise ValidationError("pair support product exceeds cap")
    diff = mu.atoms[:, None, :] - nu.atoms[None, :, :]
    costmat = np.linalg.norm(diff, axis=2) ** p
    value, _, _, _, _ = _pair_lp(mu, nu, costmat)
    return float(max(value, 0.0) ** (1.0 / p))


@dataclass(frozen=True)
class EquivalenceReport:
    """Comparison of the MMOT value with sum_i w_i W_p^p(mu_i, nu)."""

    mmot_value: float
    pairwise_value: float
    per_marginal: tuple
    gap: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.gap <= self.tol


def verify_c2m_equivalence(measures, weights, p,
                           cap=_DEFAULT_CAP) -> EquivalenceReport:
    """Check C_MM = sum_i w_i W_p^p(mu_i, nu_p) on a finite instance."""
    w, p, _ = _check_family(measures, weights, p)
    plan = solve_mmot(measures, weights, p, cap=cap)
    nu = barycenter_measure(plan)
    per = []
    for mu, wi in zip(measures, w):
        dist = wp_distance(mu, nu, p, cap=cap)
        per.append(wi * dist ** p)
    pairwise = float(sum(per))
    gap = abs(plan.objective - pairwise)
    return EquivalenceReport(
        mmot_value=plan.objective,
        pairwise_value=pairwise,
        per_marginal=tuple(per),
        gap=gap,
        tol=1e-8 * (1.0 + abs(plan.objective)),
    )


@dataclass(frozen=True)
class MonotonicityReport:
    """Result of the coordinate-swap monotonicity test on a plan support.

    min_margin : smallest value of c(y1) + c(y2) - c(x1) - c(x2) over all
        support pairs and proper swap patterns; nonnegative (within
        tolerance) for optimal plans
    """

    min_margin: float
    n_pairs: int
    n_patterns: int
    worst_pair: tuple
    worst_pattern: tuple
    tol: float

    @property
    def ok(self) -> bool:
        return self.min_margin >= -self.tol


def _tuple_costs(pts, w, p):
    z = pbary_points(pts, w, p)
    return (w[None, :] * np.linalg.norm(pts - z[:, None, :], axis=2) ** p).sum(axis=1)


def check_cp_monotone(plan_or_points, weights=None, p=None,
                      tol=1e-9) -> MonotonicityReport:
    """Test cyclical monotonicity of a support under coordinate swaps.

    For every pair of support tuples x1, x2 and every proper subset sigma of
    marginal indices, swapping the sigma-coordinates must not decrease the
    total cost.  Accepts a TransportPlan or a raw (n, N, d) array of support
    tuples (with weights and p supplied).
    """
    if isinstance(plan_or_points, TransportPlan):
        pts = plan_or_points.points
        w = plan_or_points.weights
        p = plan_or_points.p
    else:
        pts = np.asarray(plan_or_points, dtype=float)
        if weights is None or p is None:
            raise ValidationError("weights and p required with raw support points")
        w = np.asarray(weights, dtype=float).ravel()
        p = _check_exponent(p)
    n, N, d = pts.shape
    if n < 2:
        return MonotonicityReport(0.0, 0, 0, (), (), tol)
    base = _tuple_costs(pts, w, p)
    ia, ib = map(np.array, zip(*combinations(range(n), 2)))
    patterns = [
        tuple(i for i in range(N) if (mask >> i) & 1)
        for mask in range(1, 2 ** N - 1)
    ]
    best = np.inf
    worst_pair, worst_pattern = (), ()
    for pat in patterns:
        sel = np.zeros(N, bool)
        sel[list(pat)] = True
        y1 = np.where(sel[None, :, None], pts[ib], pts[ia])
        y2 = np.where(sel[None, :, None], pts[ia], pts[ib])
        m = (
            _tuple_costs(y1, w, p) + _tuple_costs(y2, w, p)
            - base[ia] - base[ib]
        )
        k = int(np.argmin(m))
        if m[k] < best:
            best = float(m[k])
            worst_pair = (int(ia[k]), int(ib[k]))
            worst_pattern = pat
    return MonotonicityReport(
        min_margin=best,
        n_pairs=len(ia),
        n_patterns=len(patterns),
        worst_pair=worst_pair,
        worst_pattern=worst_pattern,
        tol=tol,
    )


@dataclass(frozen=True)
class DualReport:
    """Probe of the Kantorovich characterization on a finite instance.

    For each marginal the two-marginal dual potentials (phi_i, psi_i) against
    the barycenter measure are extracted from the LP; the weighted sum
    sum_i w_i psi_i should be constant across barycenter atoms, up to the
    known per-component freedom of degenerate supports.  variance_shifted is
    the mass-weighted variance of that sum after optimal per-component
    constant shifts (which preserve dual optimality).
    """

    variance_raw: float
    variance_shifted: float
    components_per_marginal: tuple
    degenerate: bool
    feasibility_violation: float


def dual_check_potentials(measures, weights, p, cap=_DEFAULT_CAP) -> DualReport:
    """Extract pair duals against nu_p and test sum_i w_i psi_i = const."""
    w, p, _ = _check_family(measures, weights, p)
    plan = solve_mmot(measures, weights, p, cap=cap)
    nu = barycenter_measure(plan)
    kn = nu.n_atoms
    psis, comp_ids, degenerate = [], [], False
    feas_viol = 0.0
    for mu in measures:
        diff = mu.atoms[:, None, :] - nu.atoms[None, :, :]
        costmat = np.linalg.norm(diff, axis=2) ** p
        _, pi, phi, psi, degen = _pair_lp(mu, nu, costmat)
        degenerate |= degen
        feas_viol = max(
            feas_viol, float((phi[:, None] + psi[None, :] - costmat).max())
        )
        km = mu.n_atoms
        adj = sp.coo_matrix(
            (np.ones(int((pi > _SPARSITY_TOL).sum())),
             np.nonzero(pi > _SPARSITY_TOL)),
            shape=(km, kn),
        )
        graph = sp.bmat(
            [[None, adj], [adj.T, None]], format="csr"
        )
        n_comp, labels = connected_components(graph, directed=False)
        psis.append(psi)
        comp_ids.append(labels[km:])  # component of each nu atom
    base = sum(wi * psi for wi, psi in zip(w, psis))
    mw = nu.masses / nu.masses.sum()
    mean_raw = float((mw * base).sum())
    var_raw = float((mw * (base - mean_raw) ** 2).sum())

    # Least-squares constant shifts per (marginal, component), plus a free
    # global level t:  minimize sum_k m_k (base_k + sum_i w_i s_{i,c_i(k)} - t)^2.
    cols = []
    for i, labels in enumerate(comp_ids):
        for c in np.unique(labels):
            cols.append(w[i] * (labels == c).astype(float))
    cols.append(-np.ones(kn))
    X = np.stack(cols, axis=-1)
    sw = np.sqrt(mw)
    sol, *_ = np.linalg.lstsq(sw[:, None] * X, -sw * base, rcond=None)
    fitted = base + X @ sol
    var_shift = float((mw * fitted ** 2).sum())
    return DualReport(
        variance_raw=var_raw,
        variance_shifted=var_shift,
        components_per_marginal=tuple(
            int(np.unique(labels).size) for labels in comp_ids
        ),
        degenerate=degenerate,
        feasibility_violation=feas_viol,
    )
