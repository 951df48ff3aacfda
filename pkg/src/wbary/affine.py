"""Affine optimal maps and barycenters of affinely related measures.

An affine map T(x) = Ax + v between suitable measures is p-optimal exactly
when A is symmetric with spectrum contained in {1, zeta} for some zeta >= 0
(including A = 0 with zeta = 0).  For a family of such maps sharing their
shift and their eigenvalue-1 eigenspace, and commuting pairwise, the
barycenter of the pushforwards is again an affine image of the reference
measure: its matrix is the Frobenius p-barycenter of the family matrices,
which reduces to coordinatewise scalar barycenters in the common eigenbasis.

The module also provides the p-transform (generalized Legendre transform)

    phi^p(y) = inf_x (1/p)|x - y|^p - phi(x)

on grids, with a fixed-point check for p-concavity and the closed-form
coefficient for homogeneous potentials phi = (lam/p)|x|^p with lam <= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import _check_exponent, pbary_points
from .errors import StructureError, ValidationError
from .mmot import DiscreteMeasure, barycenter_measure, solve_mmot, wp_distance


@dataclass(frozen=True)
class AffineMap:
    """T(x) = A x + v."""

    A: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        v = np.asarray(self.v, dtype=float).ravel()
        if A.shape[0] != A.shape[1] or A.shape[0] != v.shape[0]:
            raise ValidationError(f"incompatible affine shapes {A.shape}, {v.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.A.T + self.v

    @classmethod
    def identity(cls, d: int) -> "AffineMap":
        return cls(np.eye(d), np.zeros(d))


def matrix_pbary(matrices, weights, p) -> np.ndarray:
    """Frobenius p-barycenter of square matrices.

    Solves argmin_Z sum_i w_i ||A_i - Z||_F^p by flattening to vectors in
    R^(d^2).  Families that are all diagonal with diagonals taking only the
    values 1 and a per-matrix constant are dispatched to exact per-entry
    scalar barycenters (same minimizer, cheaper and exact for the common
    structured case).
    """
    p = _check_exponent(p)
    mats = np.asarray(matrices, dtype=float)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ValidationError("matrices must be (N, d, d)")
    w = np.asarray(weights, dtype=float).ravel()
    n, d, _ = mats.shape
    if w.shape[0] != n:
        raise ValidationError("one weight per matrix required")

    offdiag = mats.copy()
    for k in range(n):
        np.fill_diagonal(offdiag[k], 0.0)
    scale = max(1.0, float(np.abs(mats).max()))
    if np.abs(offdiag).max() <= 1e-12 * scale:
        diags = np.einsum("nii->ni", mats)  # (n, d)
        out = np.zeros(d)
        for j in range(d):
            col = diags[:, j]
            if np.ptp(col) == 0.0:
                out[j] = col[0]
            else:
                out[j] = pbary_points(col[:, None], w, p)[0]
        return np.diag(out)
    z = pbary_points(mats.reshape(n, d * d), w, p)
    return z.reshape(d, d)


@dataclass(frozen=True)
class SpectrumVerdict:
    """Optimality diagnosis of an affine map's linear part.

    optimal : True when the matrix is symmetric and its spectrum clusters
        onto {1, zeta} with zeta >= 0
    zeta : the non-unit cluster value (1.0 when all eigenvalues are 1,
        0.0 for the zero matrix), None when not optimal
    """

    optimal: bool
    zeta: float | None
    eigenvalues: np.ndarray
    reason: str


def spectrum_optimality(A, tol: float = 1e-8) -> SpectrumVerdict:
    """Decide p-optimality of the linear map A from its spectrum."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValidationError("matrix must be square")
    scale = max(1.0, float(np.abs(A).max()))
    asym = float(np.abs(A - A.T).max())
    if asym > tol * scale:
        return SpectrumVerdict(
            optimal=False,
            zeta=None,
            eigenvalues=np.sort(np.linalg.eigvals(A).real),
            reason=f"not symmetric (|A - A^T| = {asym:.3e})",
        )
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    ones = np.abs(w - 1.0) <= tol
    rest = w[~ones]
    if rest.size == 0:
        return SpectrumVerdict(True, 1.0, w, "all eigenvalues equal 1")
    spread = float(rest.max() - rest.min())
    if spread > tol:
        return SpectrumVerdict(
            False, None, w,
            f"non-unit eigenvalues spread {spread:.3e} exceeds tolerance",
        )
    zeta = float(rest.mean())
    if zeta < -tol:
        return SpectrumVerdict(
            False, None, w, f"non-unit cluster {zeta:.3e} is negative"
        )
    return SpectrumVerdict(True, max(zeta, 0.0), w, "spectrum in {1, zeta}")


@dataclass(frozen=True)
class AffineBarycenterResult:
    """Barycenter of affinely related measures in closed form.

    The barycenter of the pushforwards (A_i x + v_i)_# mu is
    (Abar x + vbar)_# mu; transport is the optimal map from the first
    pushforward to the barycenter.
    """

    Abar: np.ndarray
    vbar: np.ndarray
    transport: AffineMap
    case: str


def _is_identity(A, tol):
    return float(np.abs(A - np.eye(A.shape[0])).max()) <= tol


def affine_barycenter(maps, weights, p) -> AffineBarycenterResult:
    """Closed-form barycenter matrix/shift for a structured affine family.

    Two admissible families:
      * translations: every A_i = Id (arbitrary shifts v_i);
      * linear: common shift v, commuting symmetric PSD matrices with
        spectra {1, zeta_i} whose eigenvalue-1 eigenspaces coincide, and
        A_1 invertible.
    Violations raise StructureError naming the failed condition.
    """
    p = _check_exponent(p)
    if len(maps) < 2:
        raise ValidationError("need at least two affine maps")
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != len(maps):
        raise ValidationError("one weight per map required")
    if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValidationError("weights must be positive and sum to 1")
    d = maps[0].dim
    if any(mp.dim != d for mp in maps):
        raise ValidationError("maps act on different dimensions")
    mats = np.stack([mp.A for mp in maps])
    vs = np.stack([mp.v for mp in maps])
    scale = max(1.0, float(np.abs(mats).max()))
    id_tol = 1e-9 * scale

    if all(_is_identity(mp.A, id_tol) for mp in maps):
        vbar = pbary_points(vs, w, p)
        transport = AffineMap(np.eye(d), vbar - vs[0])
        return AffineBarycenterResult(
            Abar=np.eye(d), vbar=vbar, transport=transport, case="translation"
        )

    vscale = max(1.0, float(np.abs(vs).max()))
    if np.abs(vs - vs[0][None, :]).max() > 1e-9 * vscale:
        raise StructureError(
            "non-translation families must share a common shift vector"
        )
    v = vs[0]
    sv1 = np.linalg.svd(mats[0], compute_uv=False)
    if sv1[-1] <= 1e-12 * max(sv1[0], 1.0):
        raise StructureError("first map's matrix must be invertible")
    for k, A in enumerate(mats):
        if np.abs(A - A.T).max() > 1e-9 * scale:
            raise StructureError(f"matrix {k} is not symmetric")
        verdict = spectrum_optimality(A)
        if not verdict.optimal:
            raise StructureError(
                f"matrix {k} spectrum not of the form {{1, zeta >= 0}}: "
                f"{verdict.reason}"
            )
    for a in range(len(mats)):
        for b in range(a + 1, len(mats)):
            comm = np.abs(mats[a] @ mats[b] - mats[b] @ mats[a]).max()
            lim = 1e-9 * max(1.0, np.abs(mats[a]).max()) * max(
                1.0, np.abs(mats[b]).max()
            )
            if comm > lim:
                raise StructureError(f"matrices {a} and {b} do not commute")

    # Common eigenbasis from a generic positive combination; irrational-ish
    # coefficients avoid accidental eigenvalue collisions between maps.
    coeffs = np.sqrt(np.arange(2, 2 + len(mats), dtype=float))
    _, Q = np.linalg.eigh(np.einsum("n,nij->ij", coeffs, mats))
    diags = np.empty((len(mats), d))
    for k, A in enumerate(mats):
        B = Q.T @ A @ Q
        off = B - np.diag(np.diag(B))
        if np.abs(off).max() > 1e-8 * max(1.0, np.abs(A).max()):
            raise StructureError(
                f"matrix {k} is not diagonal in the common eigenbasis"
            )
        diags[k] = np.diag(B)

    unit_sets = []
    for k in range(len(mats)):
        if _is_identity(mats[k], id_tol):
            continue
        unit_sets.append(frozenset(np.where(np.abs(diags[k] - 1.0) <= 1e-8)[0]))
    if len(set(unit_sets)) > 1:
        raise StructureError(
            "eigenvalue-1 eigenspaces of the non-identity maps differ"
        )

    mu = np.empty(d)
    for j in range(d):
        col = diags[:, j]
        mu[j] = col[0] if np.ptp(col) == 0.0 else pbary_points(col[:, None], w, p)[0]
    Abar = Q @ np.diag(mu) @ Q.T
    A1_inv = np.linalg.inv(mats[0])
    lin = Abar @ A1_inv
    transport = AffineMap(lin, v - lin @ v)
    return AffineBarycenterResult(Abar=Abar, vbar=v, transport=transport,
                                  case="linear")


@dataclass(frozen=True)
class AffineMmotReport:
    """Gap between the closed-form affine barycenter and the discrete route."""

    gap: float
    tol: float
    pitch: float
    nu_affine: DiscreteMeasure
    nu_mmot: DiscreteMeasure

    @property
    def ok(self) -> bool:
        return self.gap <= self.tol


def verify_affine_vs_mmot(mu: DiscreteMeasure, maps, weights, p,
                          cap=10 ** 6) -> AffineMmotReport:
    """Compare (Abar x + vbar)_# mu against the multi-marginal barycenter.

    The marginals are the pushforwards of mu under the maps; the tolerance
    is 3 h with h the largest nearest-neighbor spacing of the reference
    atoms (the discretization pitch), scaled by the family's matrix norm.
    """
    result = affine_barycenter(maps, weights, p)
    Abar, vbar = result.Abar, result.vbar
    nu_aff = DiscreteMeasure(mu.atoms @ Abar.T + vbar, mu.masses)
    measures = [
        DiscreteMeasure(mp.apply(mu.atoms), mu.masses) for mp in maps
    ]
    plan = solve_mmot(measures, weights, p, cap=cap)
    nu_hat = barycenter_measure(plan)
    gap = wp_distance(nu_aff, nu_hat, p, cap=cap)
    if mu.n_atoms > 1:
        diff = np.linalg.norm(
            mu.atoms[:, None, :] - mu.atoms[None, :, :], axis=2
        )
        np.fill_diagonal(diff, np.inf)
        pitch = float(diff.min(axis=1).max())
    else:
        pitch = 1.0
    mat_scale = max(1.0, float(max(np.abs(mp.A).max() for mp in maps)))
    return AffineMmotReport(
        gap=gap,
        tol=3.0 * pitch * mat_scale,
        pitch=pitch,
        nu_affine=nu_aff,
        nu_mmot=nu_hat,
    )


# ---------------------------------------------------------------------------
# p-transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PTransformResult:
    """Grid p-transform values with a degeneracy diagnostic.

    boundary_mask marks evaluation points whose infimum is attained on the
    boundary of the sample hull: there the true infimum may lie outside the
    grid and the value is only an upper bound.  boundary_fraction is the
    overall share; a majority means the transform is effectively -inf on
    most of the window.
    """

    values: np.ndarray
    boundary_fraction: float
    degenerate: bool
    boundary_mask: np.ndarray = None


def p_transform(points, values, p, eval_points=None,
                chunk: int = 2048) -> PTransformResult:
    """phi^p(y) = min_x (1/p)|x - y|^p - phi(x) over the sampled x."""
    p = _check_exponent(p)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.asarray(values, dtype=float).ravel()
    if pts.shape[0] != vals.shape[0]:
        raise ValidationError("one value per sample point required")
    ys = pts if eval_points is None else np.atleast_2d(
        np.asarray(eval_points, dtype=float)
    )
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    margin = 1e-9 * max(1.0, float(np.abs(pts).max()))
    near_face = (
        (np.abs(pts - lo[None, :]) <= margin)
        | (np.abs(pts - hi[None, :]) <= margin)
    ).any(axis=1)
    out = np.empty(ys.shape[0])
    hit = np.zeros(ys.shape[0], dtype=bool)
    for s in range(0, ys.shape[0], chunk):
        block = ys[s:s + chunk]
        dist = np.linalg.norm(block[:, None, :] - pts[None, :, :], axis=2)
        obj = dist ** p / p - vals[None, :]
        arg = np.argmin(obj, axis=1)
        out[s:s + chunk] = obj[np.arange(block.shape[0]), arg]
        hit[s:s + chunk] = near_face[arg]
    frac = float(hit.mean()) if hit.size else 0.0
    return PTransformResult(values=out, boundary_fraction=frac,
                            degenerate=frac > 0.5, boundary_mask=hit)


def _grid_spacing(points) -> float:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    h = 0.0
    for a in range(pts.shape[1]):
        u = np.unique(pts[:, a])
        if u.size > 1:
            h = max(h, float(np.diff(u).min()))
    return h if h > 0 else 1.0


@dataclass(frozen=True)
class ConcavityReport:
    """Fixed-point test of the double p-transform against the original.

    phi is p-concave when (phi^p)^p = phi; on a grid the comparison is made
    on interior points up to a tolerance from the objective's modulus of
    continuity over one grid cell.  degenerate is set when too many of the
    compared evaluations attain their infimum on the sample-hull boundary,
    i.e. the window is too small for the comparison to mean anything.
    """

    max_deviation: float
    tol: float
    degenerate: bool

    @property
    def ok(self) -> bool:
        return not self.degenerate and self.max_deviation <= self.tol


def p_concavity_check(points, values, p, interior_mask=None) -> ConcavityReport:
    """Compare (phi^p)^p with phi on the grid's interior points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.asarray(values, dtype=float).ravel()
    t1 = p_transform(pts, vals, p)
    t2 = p_transform(pts, t1.values, p)
    if interior_mask is None:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        mid, half = 0.5 * (lo + hi), 0.25 * (hi - lo)
        interior_mask = np.all(np.abs(pts - mid[None, :]) <= half[None, :], axis=1)
    dev = float(np.abs(t2.values[interior_mask] - vals[interior_mask]).max())
    h = _grid_spacing(pts)
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    grad = np.abs(np.diff(vals)).max() / h if pts.shape[1] == 1 else max(
        1.0, np.abs(vals).max()
    )
    lip = diam ** (p - 1.0) + grad
    tol = 2.0 * lip * h + 1e-9
    compared = float(t2.boundary_mask[interior_mask].mean()) if (
        interior_mask.any()
    ) else 1.0
    return ConcavityReport(
        max_deviation=dev,
        tol=tol,
        degenerate=compared > 0.25,
    )


def homogeneous_transform_coefficient(lam: float, p: float) -> float:
    """Coefficient g of phi^p = (g/p)|y|^p for phi = (lam/p)|x|^p, lam <= 0.

    g = (|lam| / (1 + |lam|))^(p-1); for lam = -1, p = 3 this equals 1/4,
    with the infimum attained at x = y/2.
    """
    p = _check_exponent(p)
    if lam > 0.0:
        raise ValidationError("closed form requires lam <= 0")
    a = abs(lam)
    return (a / (1.0 + a)) ** (p - 1.0)
