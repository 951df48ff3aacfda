"""Weighted Euclidean p-barycenters of point configurations.

The central object is the minimizer of

    phi(z) = sum_i (w_i / p) * |x_i - z|^p,        p in (1, inf),

for points x_1..x_N in R^d and positive weights w summing to one.  The
first-order condition is the Euler-Lagrange equation

    sum_i w_i |x_i - z|^(p-2) (x_i - z) = 0.

Closed forms exist for p = 2 (the weighted mean) and for N = 2 (a weighted
combination with exponent 1/(p-1)); everything else is solved with a damped
Newton iteration on phi, batched over many configurations at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, SingularBlockError, ValidationError

# Route |p - 2| below this to the exact weighted-mean formula.
P2_TOL = 1e-9
# Relative coincidence threshold: x_i counts as sitting on the barycenter
# when |x_i - z| <= EPS_COINCIDENT * diameter.
EPS_COINCIDENT = 1e-9
WEIGHT_SUM_TOL = 1e-12
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200

_ARMIJO_C1 = 1e-4
_MAX_HALVINGS = 45


def alpha_exponent(p: float) -> float:
    """alpha_p = (p - 2)/(p - 1); negative for p < 2, in [0, 1) for p >= 2."""
    return (p - 2.0) / (p - 1.0)


def beta_exponent(p: float) -> float:
    """beta_p = (2 - p)/(p - 1) = -alpha_p; positive for p in (1, 2)."""
    return (2.0 - p) / (p - 1.0)


def _check_exponent(p) -> float:
    p = float(p)
    if not np.isfinite(p) or p <= 1.0:
        raise ValidationError(f"exponent p must lie in (1, inf), got {p}")
    return p


@dataclass(frozen=True)
class WeightedPointConfig:
    """A weighted configuration (x_1..x_N, w_1..w_N, p) with validated invariants.

    points : (N, d) array, finite entries
    weights : (N,) array, strictly positive, summing to 1 within 1e-12
    p : exponent in (1, inf)
    """

    points: np.ndarray
    weights: np.ndarray
    p: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "p", _check_exponent(self.p))
        if pts.ndim != 2:
            raise ValidationError(f"points must be (N, d), got shape {pts.shape}")
        n, _ = pts.shape
        if n < 2:
            raise ValidationError("a configuration needs at least two points")
        if w.shape != (n,):
            raise ValidationError(
                f"weights shape {w.shape} does not match {n} points"
            )
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points contain non-finite entries")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValidationError("weights must be finite and strictly positive")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(
                f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {w.sum()!r}"
            )

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def diameter(self) -> float:
        return float(_diameters(self.points[None])[0])

    def el_residual(self, z) -> np.ndarray:
        return el_residual(self.points, self.weights, self.p, z)


@dataclass(frozen=True)
class BarycenterSolution:
    """Result of a p-barycenter solve.

    z : (d,) minimizer
    residual_norm : Euclidean norm of the Euler-Lagrange residual at z
    coincident_set : indices i with |x_i - z| <= 1e-9 * diameter (0-based)
    iterations : Newton steps taken (0 for closed-form routes)
    converged : always True for returned solutions (failures raise)
    borderline : True when some |x_i - z| sits within a decade of the
        coincidence threshold, i.e. the classification is fragile
    """

    z: np.ndarray
    residual_norm: float
    coincident_set: tuple
    iterations: int
    converged: bool = True
    borderline: bool = False


def el_residual(points, weights, p, z) -> np.ndarray:
    """Euler-Lagrange residual  sum_i w_i |x_i - z|^(p-2) (x_i - z).

    Accepts raw arrays; only shapes and p > 1 are validated (the weights are
    not required to sum to one here).  Terms with x_i = z contribute zero:
    the summand's magnitude is |x_i - z|^(p-1) -> 0 for every p > 1, so this
    is the continuous extension.
    """
    p = _check_exponent(p)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if pts.shape[0] != w.shape[0] or pts.shape[1] != z.shape[0]:
        raise ValidationError(
            f"incompatible shapes: points {pts.shape}, weights {w.shape}, z {z.shape}"
        )
    rvec = pts - z[None, :]
    r = np.linalg.norm(rvec, axis=1)
    hit = r == 0.0
    fac = np.zeros_like(r)
    np.power(np.maximum(r, 1e-300), p - 2.0, out=fac, where=~hit)
    return (w[:, None] * fac[:, None] * rvec).sum(axis=0)


# ---------------------------------------------------------------------------
# batched solver
# ---------------------------------------------------------------------------


def _diameters(pts: np.ndarray) -> np.ndarray:
    """Max pairwise distance per batch entry; pts is (B, N, d)."""
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    return np.sqrt((diff ** 2).sum(-1)).max(axis=(1, 2))


def _nudge_off_atoms(pts, z, floor):
    """Shift z away from any point it coincides with (within floor), in place.

    Needed for p < 2 where |x - z|^(p-2) blows up.  Tries a few fixed
    directions so a nudge cannot land on a second atom.
    """
    d = z.shape[-1]
    for attempt in range(4):
        r = np.linalg.norm(pts - z[:, None, :], axis=2)
        bad = (r < floor[:, None]).any(axis=1)
        if not bad.any():
            return z
        direction = np.zeros(d)
        direction[attempt % d] = 1.0
        if attempt >= d:
            direction[:] = 1.0 / np.sqrt(d)
        z[bad] = z[bad] + floor[bad, None] * direction[None, :]
    return z


def _eval_batch(pts, w, p, z, guard_atoms):
    """Objective, EL residual and Hessian of phi at z, batched.

    Returns (z, obj, F, H); z may have been nudged off atoms when
    guard_atoms is set (p < 2).
    """
    B, N, d = pts.shape
    if guard_atoms:
        floor = np.full(B, 1e-14) * np.maximum(_diameters(pts), 1e-300)
        z = _nudge_off_atoms(pts, np.array(z, copy=True), floor)
    rvec = pts - z[:, None, :]
    r = np.linalg.norm(rvec, axis=2)
    rpos = np.maximum(r, 1e-300)
    obj = (w / p * rpos ** p).sum(axis=1)
    fac = np.where(r > 0.0, rpos ** (p - 2.0), 0.0)
    F = (w[..., None] * fac[..., None] * rvec).sum(axis=1)
    u = rvec / rpos[..., None]
    outer = u[..., :, None] * u[..., None, :]
    eye = np.eye(d)
    H = (
        w[..., None, None]
        * fac[..., None, None]
        * ((p - 2.0) * outer + eye[None, None])
    ).sum(axis=1)
    return z, obj, F, H


def _residual_at_atoms(pts, w, p):
    """EL residual at each atom position, using the continuous limit.

    The i = j term of the residual vanishes as z -> x_j for every p > 1, so
    F(x_j) = sum_{i != j} w_i |x_i - x_j|^(p-2) (x_i - x_j).  Returns (B, N)
    residual norms.
    """
    diff = pts[:, :, None, :] - pts[:, None, :, :]  # x_i - x_j
    r = np.linalg.norm(diff, axis=3)
    fac = np.where(r > 0.0, np.maximum(r, 1e-300) ** (p - 2.0), 0.0)
    F = (w[:, :, None, None] * fac[..., None] * diff).sum(axis=1)  # (B, N, d)
    return np.linalg.norm(F, axis=2)


def _anchored_candidates(pts, w, p, z, F):
    """Fixed-point candidates anchored at each atom (p < 2 only).

    R_j is the Euler-Lagrange field with the j-th term removed, evaluated at
    the current iterate; the returned candidate solves the anchored equation
    exactly when R_j is frozen.
    """
    rvec = pts - z[:, None, :]
    r = np.maximum(np.linalg.norm(rvec, axis=2), 1e-300)
    term = w[..., None] * r[..., None] ** (p - 2.0) * rvec
    R = F[:, None, :] - term
    Rn = np.maximum(np.linalg.norm(R, axis=2), 1e-300)
    rstar = (Rn / w) ** (1.0 / (p - 1.0))
    return pts + rstar[..., None] * R / Rn[..., None]


def pbary_points(points, weights, p, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Batched p-barycenter of point tuples.

    points : (..., N, d); weights : (N,) or broadcastable to (..., N).
    Returns minimizers with shape (..., d).  Raises ConvergenceError if any
    batch entry fails to reach |residual| <= tol * max(w) * diam^(p-1).
    """
    p = _check_exponent(p)
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 2
    if single:
        pts = pts[None]
    lead = pts.shape[:-2]
    N, d = pts.shape[-2:]
    pts = pts.reshape(-1, N, d)
    w = np.broadcast_to(np.asarray(weights, dtype=float), lead + (N,)).reshape(-1, N)
    z, _, _ = _solve_batch(pts, w, p, tol, max_iter, raise_on_fail=True)
    out = z.reshape((lead + (d,)) if not single else (d,))
    return out


def _solve_batch(pts, w, p, tol, max_iter, raise_on_fail=True):
    """Core batched solve.  pts (B,N,d), w (B,N) normalized rows.

    Returns (z, iterations, residual_norm) arrays.
    """
    B, N, d = pts.shape
    diam = _diameters(pts)
    scale = w.max(axis=1) * np.maximum(diam, 1e-300) ** (p - 1.0)
    tol_abs = tol * scale

    # Degenerate: all points identical -> that point is the minimizer.
    trivial = diam == 0.0

    if abs(p - 2.0) <= P2_TOL:
        z = (w[..., None] * pts).sum(axis=1)
        F = (w[..., None] * (pts - z[:, None, :])).sum(axis=1)
        return z, np.zeros(B, int), np.linalg.norm(F, axis=1)

    if N == 2:
        s = 1.0 / (p - 1.0)
        t = w ** s
        t = t / t.sum(axis=1, keepdims=True)
        z = (t[..., None] * pts).sum(axis=1)
        z, _, F, _ = _eval_batch(pts, w, p, z, guard_atoms=p < 2.0)
        return z, np.zeros(B, int), np.linalg.norm(F, axis=1)

    guard = p < 2.0
    z = (w[..., None] * pts).sum(axis=1)
    z, obj, F, H = _eval_batch(pts, w, p, z, guard)
    res = np.linalg.norm(F, axis=1)
    active = ~trivial & (res > tol_abs)
    iters = np.zeros(B, int)

    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.where(active)[0]
        Ha, Fa = H[idx], F[idx]
        try:
            step = np.linalg.solve(Ha, Fa[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.einsum("bij,bj->bi", np.linalg.pinv(Ha), Fa)
        descent = (Fa * step).sum(axis=1)
        grad_dir = descent <= 0.0
        if grad_dir.any():
            # Fall back to a gradient step scaled to the configuration size.
            g = Fa[grad_dir]
            gn = np.linalg.norm(g, axis=1, keepdims=True)
            step[grad_dir] = g / np.maximum(gn, 1e-300) * diam[idx[grad_dir], None]
            descent[grad_dir] = (Fa[grad_dir] * step[grad_dir]).sum(axis=1)

        # Accept a step on sufficient objective decrease (Armijo) or on
        # sufficient residual decrease; the latter keeps making progress when
        # the objective is already flat to machine precision near the
        # minimizer.
        t = np.ones(len(idx))
        accepted = np.zeros(len(idx), bool)
        z_new = np.array(z[idx])
        res_old = res[idx]
        for _h in range(_MAX_HALVINGS):
            trial = z[idx] + t[:, None] * step
            trial, obj_t, F_t, _ = _eval_batch(pts[idx], w[idx], p, trial, guard)
            res_t = np.linalg.norm(F_t, axis=1)
            ok = ~accepted & (
                (obj_t <= obj[idx] - _ARMIJO_C1 * t * descent)
                | (res_t <= (1.0 - _ARMIJO_C1 * t) * res_old)
            )
            z_new[ok] = trial[ok]
            accepted |= ok
            if accepted.all():
                break
            t[~accepted] *= 0.5
        # Entries where the line search failed keep the last tiny trial step:
        # the iteration is then effectively stationary.
        if not accepted.all():
            bad = ~accepted
            z_new[bad] = z[idx][bad] + t[bad, None] * step[bad]

        z[idx] = z_new
        iters[idx] += 1
        z_idx, obj_i, F_i, H_i = _eval_batch(pts[idx], w[idx], p, z[idx], guard)
        z[idx] = z_idx
        obj[idx], F[idx], H[idx] = obj_i, F_i, H_i
        res[idx] = np.linalg.norm(F_i, axis=1)
        if guard:
            # For p < 2 the minimizer may sit extremely close to an atom,
            # where |F| ~ w r^(p-1) makes damped Newton crawl.  Solve the
            # Euler-Lagrange equation anchored at each atom instead:
            # w_j r^(p-2) (x_j - z) = -R_j(z) with R_j the smooth rest
            # field, giving the candidate
            # z = x_j + (|R_j|/w_j)^(1/(p-1)) R_j/|R_j|.
            # Candidates are accepted only when they reduce the residual.
            zc = _anchored_candidates(pts[idx], w[idx], p, z[idx], F_i)
            nb, nN = zc.shape[:2]
            flat = zc.reshape(nb * nN, -1)
            pts_rep = np.repeat(pts[idx], nN, axis=0)
            w_rep = np.repeat(w[idx], nN, axis=0)
            zf, of, Ff, Hf = _eval_batch(pts_rep, w_rep, p, flat, guard)
            rf = np.linalg.norm(Ff, axis=1).reshape(nb, nN)
            best = rf.argmin(axis=1)
            take = rf[np.arange(nb), best] < res[idx]
            if take.any():
                rows = np.where(take)[0]
                sel = rows * nN + best[rows]
                gsel = idx[rows]
                z[gsel] = zf[sel]
                obj[gsel], F[gsel], H[gsel] = of[sel], Ff[sel], Hf[sel]
                res[gsel] = np.linalg.norm(Ff[sel], axis=1)
            # The minimizer can sit exactly on an atom (the rest field
            # vanishes there).  The residual extends continuously to the
            # atoms, so accept an exact atom position when it already meets
            # the tolerance.
            r_at = _residual_at_atoms(pts[idx], w[idx], p)
            jbest = r_at.argmin(axis=1)
            hit = r_at[np.arange(len(idx)), jbest] <= tol_abs[idx]
            if hit.any():
                rows = np.where(hit)[0]
                gsel = idx[rows]
                z[gsel] = pts[gsel, jbest[rows]]
                res[gsel] = r_at[rows, jbest[rows]]
        active[idx] = res[idx] > tol_abs[idx]

    z[trivial] = pts[trivial, 0]
    res[trivial] = 0.0
    if active.any():
        if raise_on_fail:
            k = int(np.where(active)[0][0])
            raise ConvergenceError(
                f"{int(active.sum())} of {B} barycenter solves did not reach "
                f"tolerance {tol:g} within {max_iter} iterations "
                f"(worst residual {res[active].max():.3e}, scale {scale[k]:.3e})",
                best=z,
                residual=res,
            )
    return z, iters, res


def pbary_solve(config: WeightedPointConfig, tol=DEFAULT_TOL,
                max_iter=DEFAULT_MAX_ITER) -> BarycenterSolution:
    """Solve for the weighted p-barycenter of a validated configuration."""
    pts = config.points[None]
    w = config.weights[None]
    z, iters, res = _solve_batch(pts, w, config.p, tol, max_iter)
    z0 = z[0]
    diam = config.diameter
    r = np.linalg.norm(config.points - z0[None, :], axis=1)
    thr = EPS_COINCIDENT * diam
    coincident = tuple(int(i) for i in np.where(r <= thr)[0]) if diam > 0 else tuple(
        range(config.n_points)
    )
    borderline = bool(diam > 0 and np.any((r > 0.1 * thr) & (r < 10.0 * thr)))
    return BarycenterSolution(
        z=z0,
        residual_norm=float(res[0]),
        coincident_set=coincident,
        iterations=int(iters[0]),
        converged=True,
        borderline=borderline,
    )


# ---------------------------------------------------------------------------
# curvature blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureBlocks:
    """Per-point curvature blocks at a p-barycenter.

    H : (N, d, d) with H_i = w_i |x_i - z|^(p-2) ((p-2) u u^T + Id)
    Hbar : (d, d), the sum of the blocks
    Lambda : (N,) smallest eigenvalue of H_i Hbar^{-1} H_i
    coincident_set : indices with |x_i - z| <= 1e-9 * diameter
    """

    H: np.ndarray
    Hbar: np.ndarray
    Lambda: np.ndarray
    coincident_set: tuple = field(default_factory=tuple)


def curvature_blocks(config: WeightedPointConfig, z=None) -> CurvatureBlocks:
    """Curvature blocks H_i, their sum, and the mixed eigenvalues Lambda_i.

    z defaults to the solved barycenter.  For p < 2 a coincident point makes
    its block unbounded; this raises SingularBlockError.  Lambda_i is computed
    through a Cholesky factor of Hbar: with L L^T = Hbar and X = L^{-1} H_i,
    Lambda_i is the smallest eigenvalue of X^T X, i.e. sigma_min(X)^2.
    """
    p = config.p
    if z is None:
        z = pbary_solve(config).z
    z = np.asarray(z, dtype=float).ravel()
    pts, w = config.points, config.weights
    n, d = pts.shape
    diam = config.diameter
    rvec = pts - z[None, :]
    r = np.linalg.norm(rvec, axis=1)
    thr = EPS_COINCIDENT * max(diam, 1e-300)
    coincident = tuple(int(i) for i in np.where(r <= thr)[0])
    if p < 2.0 - P2_TOL and coincident:
        raise SingularBlockError(
            f"curvature block unbounded for p={p} at coincident point(s) "
            f"{coincident}"
        )
    H = np.zeros((n, d, d))
    eye = np.eye(d)
    if abs(p - 2.0) <= P2_TOL:
        H[:] = w[:, None, None] * eye[None]
    else:
        pos = r > 0.0
        rp = np.zeros(n)
        rp[pos] = r[pos] ** (p - 2.0)
        u = np.zeros_like(rvec)
        u[pos] = rvec[pos] / r[pos, None]
        outer = u[:, :, None] * u[:, None, :]
        H = w[:, None, None] * rp[:, None, None] * ((p - 2.0) * outer + eye[None])
    Hbar = H.sum(axis=0)
    try:
        L = np.linalg.cholesky(Hbar)
    except np.linalg.LinAlgError as exc:
        raise SingularBlockError(
            "sum of curvature blocks is singular (all blocks vanish?)"
        ) from exc
    lam = np.empty(n)
    for i in range(n):
        X = np.linalg.solve(L, H[i])
        sv = np.linalg.svd(X, compute_uv=False)
        lam[i] = sv[-1] ** 2
    return CurvatureBlocks(H=H, Hbar=Hbar, Lambda=lam, coincident_set=coincident)


def dbary_dxi(config: WeightedPointConfig, i: int, z=None) -> np.ndarray:
    """Jacobian of the barycenter with respect to the i-th point: Hbar^{-1} H_i.

    The blocks sum to the identity over i, reflecting translation
    equivariance of the barycenter map.
    """
    if not 0 <= i < config.n_points:
        raise ValidationError(f"point index {i} out of range")
    cb = curvature_blocks(config, z=z)
    return np.linalg.solve(cb.Hbar, cb.H[i])
