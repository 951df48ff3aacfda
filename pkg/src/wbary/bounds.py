"""Support-geometry quantities and L^q estimates for barycenter densities.

Two separation quantities control integrability of the pushforward density:

  D : the smallest distance between a full-tuple barycenter and the
      barycenter of the same tuple with the first point removed ("how far
      the first marginal moves the barycenter");
  m : the smallest distance between any tuple point and the tuple
      barycenter.

For p > 2 the density bound needs D > 0; for p < 2 it needs m > 0.  The
general L^q estimate decomposes the source into cells classified by which
tuple points the barycenter touches, and weights the non-degenerate cells by
a curvature ratio; the local injectivity check validates the quantitative
injectivity of the barycenter map on plan supports.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import EPS_COINCIDENT, P2_TOL, _check_exponent, alpha_exponent, pbary_points
from .errors import GeometryError, ValidationError
from .grid import GridDensity

_DEFAULT_CAP = 10 ** 6


# ---------------------------------------------------------------------------
# separation quantities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupportGeometry:
    """Exhaustively computed separation quantities of discrete supports.

    D : min |bary(x_1..x_N) - bary(x_2..x_N)| over the support product
    m : min over i of |x_i - bary(x_1..x_N)| over the support product
    """

    D: float
    m: float
    n_tuples: int


def _support_product(measures, cap):
    shape = tuple(mu.n_atoms for mu in measures)
    total = int(np.prod(shape))
    if total > cap:
        raise ValidationError(
            f"support product size {total} exceeds cap {cap}"
        )
    idx = np.indices(shape).reshape(len(shape), -1).T
    pts = np.stack(
        [measures[i].atoms[idx[:, i]] for i in range(len(measures))], axis=1
    )
    return pts  # (total, N, d)


def compute_D(measures, weights, p, cap=_DEFAULT_CAP) -> float:
    """Smallest displacement of the barycenter caused by the first marginal.

    Evaluates |bary(x_1, ..., x_N) - bary(x_2, ..., x_N)| over all support
    tuples and returns the minimum.  Zero means some atom of mu_1 leaves the
    barycenter where the remaining marginals already put it.
    """
    p = _check_exponent(p)
    w = np.asarray(weights, dtype=float).ravel()
    reduced = _support_product(measures[1:], cap)  # (B2, N-1, d)
    wr = w[1:] / w[1:].sum()
    if reduced.shape[1] == 1:
        zr = reduced[:, 0, :]
    else:
        zr = pbary_points(reduced, wr, p)
    first = measures[0].atoms  # (K1, d)
    B2 = reduced.shape[0]
    K1 = first.shape[0]
    if K1 * B2 * 1.0 > cap:
        raise ValidationError("full support product exceeds cap")
    full = np.empty((K1, B2, reduced.shape[1] + 1, reduced.shape[2]))
    full[:, :, 0, :] = first[:, None, :]
    full[:, :, 1:, :] = reduced[None, :, :, :]
    zf = pbary_points(full.reshape(K1 * B2, -1, reduced.shape[2]), w, p)
    dist = np.linalg.norm(
        zf.reshape(K1, B2, -1) - zr[None, :, :], axis=2
    )
    return float(dist.min())


def compute_m(measures, weights, p, cap=_DEFAULT_CAP) -> float:
    """Smallest distance between any tuple point and the tuple barycenter."""
    p = _check_exponent(p)
    w = np.asarray(weights, dtype=float).ravel()
    pts = _support_product(measures, cap)
    z = pbary_points(pts, w, p)
    dist = np.linalg.norm(pts - z[:, None, :], axis=2)
    return float(dist.min())


def compute_geometry(measures, weights, p, cap=_DEFAULT_CAP) -> SupportGeometry:
    """Both separation quantities over the (capped) support product."""
    pts = _support_product(measures, cap)
    return SupportGeometry(
        D=compute_D(measures, weights, p, cap=cap),
        m=compute_m(measures, weights, p, cap=cap),
        n_tuples=pts.shape[0],
    )


# ---------------------------------------------------------------------------
# integrability bound with distant supports
# ---------------------------------------------------------------------------


def integrability_bound(f1_lq, q, p, lam1, d, D=None, m=None,
                        constant=1.0) -> float:
    """Upper bound for the L^q norm of the barycenter density.

        bound = constant * (lam1^(d(1-alpha)) * geom^(d|p-2|))^(-(q-1)/q) * ||f1||_q

    with geom = D for p > 2 and geom = m for p < 2 (neither is needed at
    p = 2, where the bound is exactly lam1^(d(1-q)/q) ||f1||_q with
    constant 1).  Raises GeometryError when the required separation vanishes:
    the estimate then carries no information.
    """
    p = _check_exponent(p)
    if q <= 1.0:
        raise ValidationError(f"q must exceed 1, got {q}")
    if not 0.0 < lam1 < 1.0:
        raise ValidationError("lam1 must lie in (0, 1)")
    if d < 1:
        raise ValidationError("dimension must be at least 1")
    a = alpha_exponent(p)
    if abs(p - 2.0) <= P2_TOL:
        prefactor = lam1 ** d
    elif p > 2.0:
        if D is None or D <= 0.0:
            raise GeometryError(
                "p > 2 bound requires positive barycenter displacement D"
            )
        prefactor = lam1 ** (d * (1.0 - a)) * D ** (d * (p - 2.0))
    else:
        if m is None or m <= 0.0:
            raise GeometryError(
                "p < 2 bound requires positive point-barycenter separation m"
            )
        prefactor = lam1 ** (d * (1.0 - a)) * m ** (d * (2.0 - p))
    return float(constant * prefactor ** (-(q - 1.0) / q) * f1_lq)


# ---------------------------------------------------------------------------
# general L^q estimate via cell classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneralLqReport:
    """Cell-classified upper bound for the integral of g_p^q.

    value : the bound for int g_p^q (add ^(1/q) for the norm)
    n_cells_first : cells where the barycenter touches the first point
        (coefficient one)
    n_cells_curved : cells weighted by the curvature ratio
    n_flagged : cells whose smallest curvature eigenvalue stayed below
        1e-14 after one refinement (bound carries no information there)
    diverging : True when flagged cells exist
    """

    value: float
    n_cells_first: int
    n_cells_curved: int
    n_flagged: int
    diverging: bool

    def dominates(self, measured: float, rel_tol: float = 1e-9) -> bool:
        return measured <= self.value * (1.0 + rel_tol) + rel_tol


def _tuple_blocks(pts, w, p, z):
    """Curvature blocks w_i r^(p-2) ((p-2) u u^T + Id) for tuples (B,N,d)."""
    B, N, d = pts.shape
    rvec = pts - z[:, None, :]
    r = np.linalg.norm(rvec, axis=2)
    rs = np.maximum(r, 1e-300)
    fac = np.where(r > 0.0, rs ** (p - 2.0), 0.0 if p >= 2.0 else np.inf)
    fac = np.where(np.isinf(fac), 1e300, fac)
    u = rvec / rs[..., None]
    outer = u[..., :, None] * u[..., None, :]
    eye = np.eye(d)
    H = (
        w[None, :, None, None]
        * fac[..., None, None]
        * ((p - 2.0) * outer + eye[None, None])
    )
    return H, r


def _lambda_ratio(H, exclude):
    """(max spectral norm, min Lambda) over non-excluded blocks.

    Lambda_i is the smallest eigenvalue of H_i Hbar^{-1} H_i with Hbar the
    sum over *all* blocks.
    """
    Hbar = H.sum(axis=0)
    try:
        L = np.linalg.cholesky(Hbar)
    except np.linalg.LinAlgError:
        return np.inf, 0.0
    max_norm, min_lam = 0.0, np.inf
    for i in range(H.shape[0]):
        if exclude[i]:
            continue
        sv_full = np.linalg.svd(H[i], compute_uv=False)
        max_norm = max(max_norm, float(sv_full[0]))
        X = np.linalg.solve(L, H[i])
        sv = np.linalg.svd(X, compute_uv=False)
        min_lam = min(min_lam, float(sv[-1] ** 2))
    return max_norm, min_lam


def _classify_cells(xs, maps, w, p):
    """Barycenters, coincidence classes, and tuple geometry for cell centers."""
    M, d = xs.shape
    N = len(maps) + 1
    pts = np.empty((M, N, d))
    pts[:, 0, :] = xs
    for i, T in enumerate(maps):
        pts[:, i + 1, :] = T(xs)
    z = pbary_points(pts, w, p)
    r = np.linalg.norm(pts - z[:, None, :], axis=2)
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    diam = np.sqrt((diff ** 2).sum(-1)).max(axis=(1, 2))
    in_S = r <= EPS_COINCIDENT * np.maximum(diam, 1e-300)[:, None]
    in_S[diam == 0.0] = True
    return pts, z, in_S


def _cell_coefficients(xs, maps, w, p, q, d):
    """Per-cell coefficient of f1^q in the classified estimate."""
    pts, z, in_S = _classify_cells(xs, maps, w, p)
    M = xs.shape[0]
    coeff = np.ones(M)
    flagged = np.zeros(M, bool)
    first = in_S[:, 0]
    other = ~first
    if other.any():
        H, _ = _tuple_blocks(pts[other], w, p, z[other])
        idx = np.where(other)[0]
        for k, b in enumerate(idx):
            max_norm, min_lam = _lambda_ratio(H[k], exclude=in_S[b])
            if min_lam < 1e-14:
                flagged[b] = True
                coeff[b] = np.inf
            else:
                coeff[b] = 2.0 ** (d * (q - 1.0)) * (
                    max_norm / min_lam
                ) ** (d * (q - 1.0))
    return coeff, first, flagged


def general_lq_bound(f1: GridDensity, maps, weights, p, q) -> GeneralLqReport:
    """Classified upper bound for int g_p^q under maps (T_2, ..., T_N).

    maps is a sequence of N-1 callables sending (M, d) source points to the
    matched points of the other marginals (constant maps for Dirac
    marginals, the identity when marginals coincide).  Cells where the
    barycenter coincides with the first point contribute f1^q directly; all
    other cells are weighted by 2^(d(q-1)) (max|H_i| / min Lambda_i)^(d(q-1))
    over the non-coincident blocks.  Cells whose ratio degenerates are
    refined once (3^d subcells); if still degenerate they are flagged and
    the bound is reported as diverging.
    """
    p = _check_exponent(p)
    if q <= 1.0:
        raise ValidationError(f"q must exceed 1, got {q}")
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != len(maps) + 1:
        raise ValidationError("need exactly one weight per marginal")
    d = f1.dim
    mask = f1.values.ravel() > 0.0
    xs = f1.centers()[mask]
    vals = f1.values.ravel()[mask]
    coeff, first, flagged = _cell_coefficients(xs, maps, w, p, q, d)

    n_flagged = 0
    if flagged.any():
        h = f1.cell_widths
        offs = (np.arange(3) + 0.5) / 3.0
        mesh = np.meshgrid(*([offs] * d), indexing="ij")
        rel = np.stack([m.ravel() for m in mesh], axis=-1)
        for b in np.where(flagged)[0]:
            lo = xs[b] - 0.5 * h
            sub = lo[None, :] + rel * h[None, :]
            c_sub, f_sub, fl_sub = _cell_coefficients(sub, maps, w, p, q, d)
            c_sub = np.where(f_sub, 1.0, c_sub)
            if fl_sub.any():
                n_flagged += 1
            else:
                coeff[b] = float(c_sub.mean())
                flagged[b] = False

    contrib = np.where(first, 1.0, coeff) * vals ** q
    value = float(contrib.sum() * f1.cell_volume)
    return GeneralLqReport(
        value=value,
        n_cells_first=int(first.sum()),
        n_cells_curved=int((~first & ~flagged).sum()),
        n_flagged=int(flagged.sum()),
        diverging=bool(flagged.any()),
    )


def constant_maps(anchors) -> list:
    """Maps sending every source point to fixed anchors (Dirac marginals)."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))

    def make(a):
        return lambda xs: np.broadcast_to(a, xs.shape).copy()

    return [make(a) for a in anchors]


def identity_maps(n: int) -> list:
    """n copies of the identity map (all marginals equal to the first)."""
    return [lambda xs: np.array(xs, copy=True) for _ in range(n)]


# ---------------------------------------------------------------------------
# local injectivity of the barycenter map on plan supports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InjectivityReport:
    """Outcome of the shrinking-radius injectivity check.

    Every base support point must admit a radius at which all same-class
    pairs inside the product-space ball satisfy

        |bary(y) - bary(yt)| >= kappa * (sum_{i not in S} |y_i - yt_i|^2)^(1/2)

    with kappa = (1/2) min Lambda_i / max |H_i| over the non-coincident
    blocks at the base point.  Bases whose final ball contains fewer than
    two candidates pass vacuously.
    """

    ok: bool
    n_bases: int
    n_checked_bases: int
    vacuous_bases: int
    max_halvings_used: int
    min_radius: float
    worst_deficit: float


def local_injectivity_check(points, weights, p, r_init=None,
                            max_halvings=40) -> InjectivityReport:
    """Run the shrinking-radius injectivity test on support tuples.

    points : (n, N, d) support tuples of a coupling (for a TransportPlan,
        pass plan.points and plan.weights/plan.p)
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 3:
        raise ValidationError("support points must be (n, N, d)")
    p = _check_exponent(p)
    w = np.asarray(weights, dtype=float).ravel()
    n, N, d = pts.shape
    z = pbary_points(pts, w, p)
    r_pt = np.linalg.norm(pts - z[:, None, :], axis=2)
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    diam = np.sqrt((diff ** 2).sum(-1)).max(axis=(1, 2))
    in_S = r_pt <= EPS_COINCIDENT * np.maximum(diam, 1e-300)[:, None]
    in_S[diam == 0.0] = True
    classes = [tuple(np.where(in_S[k])[0]) for k in range(n)]

    # Pairwise product-space distances between support tuples.
    pd_full = np.sqrt(
        ((pts[:, None, :, :] - pts[None, :, :, :]) ** 2).sum(axis=(2, 3))
    )
    scale = max(float(diam.max()), 1e-300)
    if r_init is None:
        r_init = 1.01 * float(pd_full.max()) if n > 1 else 1.0
    H_all, _ = _tuple_blocks(pts, w, p, z)

    ok = True
    worst = np.inf
    used_halvings = 0
    min_radius = r_init
    vacuous = 0
    checked = 0
    for k in range(n):
        S = classes[k]
        if len(S) == N:
            continue  # fully coincident tuple: the estimate excludes S = full
        checked += 1
        excl = np.zeros(N, bool)
        excl[list(S)] = True
        max_norm, min_lam = _lambda_ratio(H_all[k], exclude=excl)
        if not np.isfinite(max_norm) or max_norm <= 0.0:
            continue
        kappa = 0.5 * min_lam / max_norm
        mates = np.array(
            [j for j in range(n) if classes[j] == S], dtype=int
        )
        r = r_init
        passed = False
        for halv in range(max_halvings + 1):
            inside = mates[pd_full[k, mates] <= r]
            if len(inside) < 2:
                vacuous += 1
                passed = True
                break
            deficit = 0.0
            for a, b in combinations(inside, 2):
                lhs = np.linalg.norm(z[a] - z[b])
                rhs = kappa * np.sqrt(
                    ((pts[a] - pts[b])[~excl] ** 2).sum()
                )
                deficit = min(deficit, float(lhs - rhs + 1e-12 * scale))
            if deficit >= 0.0:
                passed = True
                break
            worst = min(worst, deficit)
            r *= 0.5
            used_halvings = max(used_halvings, halv + 1)
        min_radius = min(min_radius, r)
        ok &= passed
    return InjectivityReport(
        ok=ok,
        n_bases=n,
        n_checked_bases=checked,
        vacuous_bases=vacuous,
        max_halvings_used=used_halvings,
        min_radius=min_radius,
        worst_deficit=float(worst if np.isfinite(worst) else 0.0),
    )
