"""Semidiscrete barycenter problems: one diffuse marginal, N-1 Dirac anchors.

With weights (w_1, ..., w_N) and fixed anchor points xh_2, ..., xh_N, the map
b(x_1) = barycenter(x_1, xh_2, ..., xh_N) sends the first coordinate to the
weighted p-barycenter of the tuple.  Writing

    Gbar(z) = sum_{i>=2} w_i |xh_i - z|^(p-2) (xh_i - z),

the Euler-Lagrange equation gives a closed-form inverse

    b^{-1}(z) = z - w_1^{alpha-1} * Gbar(z) * |Gbar(z)|^{-alpha},
    alpha = (p-2)/(p-1),

with the continuous extension b^{-1}(z) = z where Gbar vanishes (the fixed
point zbar, the barycenter of the anchors alone).  The Jacobian of b^{-1} is
generally non-symmetric but is a product of symmetric positive matrices, so
its spectrum is real; eigenvalues are computed exactly through a symmetric
similarity transform.  These eigenvalues drive everything else here: two-sided
bounds, pushforward densities of the induced barycenter measure, and local
blow-up exponents that decide L^q membership.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    P2_TOL,
    alpha_exponent,
    beta_exponent,
    _check_exponent,
    pbary_points,
)
from .errors import (
    InsufficientDataError,
    SingularPointError,
    ValidationError,
)
from .grid import GridDensity

_GBAR_ZERO = 1e-300


@dataclass(eq=False)
class DiracConfiguration:
    """Weights, exponent, and anchor points of a semidiscrete problem.

    anchors : (N-1, d) positions of the Dirac marginals mu_2..mu_N
    weights : (N,) positive, summing to one; weights[0] belongs to the
        diffuse first marginal
    p : exponent in (1, inf)
    """

    anchors: np.ndarray
    weights: np.ndarray
    p: float

    def __post_init__(self):
        anchors = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        self.anchors = anchors
        self.weights = w
        self.p = _check_exponent(self.p)
        if anchors.ndim != 2 or anchors.shape[0] < 1:
            raise ValidationError("anchors must be a nonempty (N-1, d) array")
        if w.shape[0] != anchors.shape[0] + 1:
            raise ValidationError(
                f"{w.shape[0]} weights do not match {anchors.shape[0]} anchors"
            )
        if not np.all(np.isfinite(anchors)):
            raise ValidationError("anchors contain non-finite entries")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("weights must be positive and sum to 1")

    @property
    def lam1(self) -> float:
        return float(self.weights[0])

    @property
    def dim(self) -> int:
        return self.anchors.shape[1]

    @property
    def n_marginals(self) -> int:
        return self.weights.shape[0]

    @property
    def alpha(self) -> float:
        return alpha_exponent(self.p)

    @property
    def beta(self) -> float:
        return beta_exponent(self.p)

    @cached_property
    def fixed_point(self) -> np.ndarray:
        """zbar: the barycenter of the anchors under renormalized weights.

        This is the unique point where Gbar vanishes, and the fixed point of
        both b and b^{-1}.
        """
        w = self.weights[1:]
        if len(w) == 1:
            return np.array(self.anchors[0], copy=True)
        return pbary_points(self.anchors, w / w.sum(), self.p)

    @cached_property
    def geometry_scale(self) -> float:
        """Diameter of anchors together with the fixed point (length scale)."""
        pts = np.vstack([self.anchors, self.fixed_point[None, :]])
        diff = pts[:, None, :] - pts[None, :, :]
        d = float(np.sqrt((diff ** 2).sum(-1)).max())
        return d if d > 0 else 1.0


def _as_batch(z, d):
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zb = z[None] if single else z.reshape(-1, d)
    if zb.shape[-1] != d:
        raise ValidationError(f"points have dimension {zb.shape[-1]}, expected {d}")
    return zb, single, z.shape


def gbar(cfg: DiracConfiguration, z) -> np.ndarray:
    """Gbar(z) = sum_{i>=2} w_i |xh_i - z|^(p-2) (xh_i - z), vectorized.

    For p < 2 the summand is undefined at the anchors themselves.
    """
    zb, single, shape = _as_batch(z, cfg.dim)
    rvec = cfg.anchors[None, :, :] - zb[:, None, :]
    r = np.linalg.norm(rvec, axis=2)
    hit = r == 0.0
    if cfg.p < 2.0 - P2_TOL and hit.any():
        raise SingularPointError("Gbar undefined at an anchor for p < 2")
    fac = np.zeros_like(r)
    np.power(np.maximum(r, _GBAR_ZERO), cfg.p - 2.0, out=fac, where=~hit)
    if abs(cfg.p - 2.0) <= P2_TOL:
        fac[hit] = 1.0
    out = (cfg.weights[1:][None, :, None] * fac[..., None] * rvec).sum(axis=1)
    return out[0] if single else out.reshape(shape)


def b_forward(cfg: DiracConfiguration, x1, tol=DEFAULT_TOL,
              max_iter=DEFAULT_MAX_ITER) -> np.ndarray:
    """b(x_1): the full barycenter with the first point at x_1, vectorized."""
    xb, single, shape = _as_batch(x1, cfg.dim)
    B = xb.shape[0]
    pts = np.empty((B, cfg.n_marginals, cfg.dim))
    pts[:, 0, :] = xb
    pts[:, 1:, :] = cfg.anchors[None, :, :]
    z = pbary_points(pts, cfg.weights, cfg.p, tol=tol, max_iter=max_iter)
    return z[0] if single else z.reshape(shape)


def b_inverse(cfg: DiracConfiguration, z) -> np.ndarray:
    """Closed-form inverse of b, with b^{-1}(zbar) = zbar by continuity."""
    zb, single, shape = _as_batch(z, cfg.dim)
    G = gbar(cfg, zb)
    Gn = np.linalg.norm(G, axis=1)
    out = np.array(zb, copy=True)
    pos = Gn > 0.0
    lam1 = cfg.lam1
    a = cfg.alpha
    out[pos] -= lam1 ** (a - 1.0) * G[pos] * Gn[pos, None] ** (-a)
    return out[0] if single else out.reshape(shape)


def _neg_grad_gbar(cfg: DiracConfiguration, zb) -> np.ndarray:
    """-grad Gbar(z) = sum_{i>=2} w_i r^(p-2) ((p-2) u u^T + Id), u = (z-xh)/r."""
    p, d = cfg.p, cfg.dim
    rvec = zb[:, None, :] - cfg.anchors[None, :, :]
    r = np.linalg.norm(rvec, axis=2)
    if np.any(r == 0.0) and abs(p - 2.0) > P2_TOL:
        raise SingularPointError("grad Gbar undefined at an anchor")
    rp = np.maximum(r, _GBAR_ZERO) ** (p - 2.0)
    u = rvec / np.maximum(r, _GBAR_ZERO)[..., None]
    outer = u[..., :, None] * u[..., None, :]
    eye = np.eye(d)
    return (
        cfg.weights[1:][None, :, None, None]
        * rp[..., None, None]
        * ((p - 2.0) * outer + eye[None, None])
    ).sum(axis=1)


def _sym_factor(cfg, G, Gn):
    """A^{1/2} for A = Id - alpha * P with P the projector onto Gbar.

    A is positive definite (eigenvalues 1 - alpha and 1), so the square root
    shares its eigenvectors: A^{1/2} = Id + (sqrt(1 - alpha) - 1) P.
    """
    d = cfg.dim
    u = G / Gn[:, None]
    P = u[:, :, None] * u[:, None, :]
    s = math.sqrt(1.0 - cfg.alpha) - 1.0
    return np.eye(d)[None] + s * P, P


def grad_b_inverse(cfg: DiracConfiguration, z) -> np.ndarray:
    """Jacobian matrix of b^{-1} at z (generally non-symmetric), vectorized.

    Excluded points: zbar for p > 2 (the Jacobian blows up there) and the
    anchors for p < 2.  For p = 2 the Jacobian is (1/w_1) Id everywhere, and
    for p < 2 it extends continuously to the identity at zbar.
    """
    zb, single, shape = _as_batch(z, cfg.dim)
    d = cfg.dim
    out = np.empty((zb.shape[0], d, d))
    if abs(cfg.p - 2.0) <= P2_TOL:
        out[:] = np.eye(d)[None] / cfg.lam1
        return out[0] if single else out.reshape(shape[:-1] + (d, d))
    G = gbar(cfg, zb)
    Gn = np.linalg.norm(G, axis=1)
    zero = Gn == 0.0
    if cfg.p > 2.0 and zero.any():
        raise SingularPointError(
            "grad of b^{-1} is unbounded at the anchor barycenter for p > 2"
        )
    out[zero] = np.eye(d)[None]
    pos = ~zero
    if pos.any():
        S = _neg_grad_gbar(cfg, zb[pos]) / Gn[pos, None, None] ** cfg.alpha
        u = G[pos] / Gn[pos, None]
        P = u[:, :, None] * u[:, None, :]
        A = np.eye(d)[None] - cfg.alpha * P
        c = cfg.lam1 ** (cfg.alpha - 1.0)
        out[pos] = np.eye(d)[None] + c * np.einsum("bij,bjk->bik", A, S)
    return out[0] if single else out.reshape(shape[:-1] + (d, d))


def grad_b_inverse_eigs(cfg: DiracConfiguration, z) -> np.ndarray:
    """Eigenvalues of grad b^{-1}(z), ascending, computed exactly as reals.

    grad b^{-1} = Id + c A S with A = Id - alpha P symmetric positive definite
    and S symmetric positive semidefinite, so it is similar to the symmetric
    matrix Id + c A^{1/2} S A^{1/2}; eigvalsh of that gives the spectrum.
    """
    zb, single, shape = _as_batch(z, cfg.dim)
    d = cfg.dim
    out = np.empty((zb.shape[0], d))
    if abs(cfg.p - 2.0) <= P2_TOL:
        out[:] = 1.0 / cfg.lam1
        return out[0] if single else out.reshape(shape[:-1] + (d,))
    G = gbar(cfg, zb)
    Gn = np.linalg.norm(G, axis=1)
    zero = Gn == 0.0
    if cfg.p > 2.0 and zero.any():
        raise SingularPointError(
            "spectrum of grad b^{-1} is unbounded at the anchor barycenter for p > 2"
        )
    out[zero] = 1.0
    pos = ~zero
    if pos.any():
        S = _neg_grad_gbar(cfg, zb[pos]) / Gn[pos, None, None] ** cfg.alpha
        Ah, _ = _sym_factor(cfg, G[pos], Gn[pos])
        M = np.einsum("bij,bjk,bkl->bil", Ah, S, Ah)
        M = 0.5 * (M + np.swapaxes(M, 1, 2))
        c = cfg.lam1 ** (cfg.alpha - 1.0)
        out[pos] = 1.0 + c * np.linalg.eigvalsh(M)
    return out[0] if single else out.reshape(shape[:-1] + (d,))


def jacobian_det(cfg: DiracConfiguration, z) -> np.ndarray:
    """|det grad b^{-1}(z)|, vectorized."""
    zb, single, shape = _as_batch(z, cfg.dim)
    if abs(cfg.p - 2.0) <= P2_TOL:
        out = np.full(zb.shape[0], cfg.lam1 ** (-cfg.dim))
    else:
        eigs = grad_b_inverse_eigs(cfg, zb)
        out = np.abs(np.prod(eigs, axis=-1))
    return float(out[0]) if single else out.reshape(shape[:-1])


# ---------------------------------------------------------------------------
# two-sided eigenvalue bounds
# ---------------------------------------------------------------------------


def nonsharp_constant(p: float) -> float:
    """Explicit constant C_p = (p-1)^(1+alpha) * 2^((p-2) alpha) for p >= 2."""
    a = alpha_exponent(p)
    return (p - 1.0) ** (1.0 + a) * 2.0 ** ((p - 2.0) * a)


@dataclass(frozen=True)
class EigBoundReportPGe2:
    """Margins of the eigenvalue bounds for p >= 2, minimized over the z batch.

    lower_unit_margin : min eig - 1 (the universal lower bound)
    lower_local_margin : min eig minus 1 + (1-alpha) A / (w1^(1-alpha) |G|^alpha)
    upper_local_margin : 1 + (p-1) A / (w1^(1-alpha) |G|^alpha) minus max eig
    upper_explicit_margin : explicit bound with the closed-form constant C_p
        and the ratio M(z)/|z - zbar| minus max eig
    """

    lower_unit_margin: float
    lower_local_margin: float
    upper_local_margin: float
    upper_explicit_margin: float
    worst_z_lower: np.ndarray
    worst_z_upper: np.ndarray
    n_points: int

    @property
    def ok(self) -> bool:
        return (
            self.lower_unit_margin >= -1e-9
            and self.lower_local_margin >= -1e-9
            and self.upper_local_margin >= -1e-9
            and self.upper_explicit_margin >= -1e-9
        )


def check_bounds_p_ge2(cfg: DiracConfiguration, z) -> EigBoundReportPGe2:
    """Check the two-sided Jacobian eigenvalue bounds for p >= 2 at points z.

    Every eigenvalue of grad b^{-1} must lie between
        1 + (1 - alpha) A(z) / (w1^(1-alpha) |Gbar|^alpha)   and
        1 + (p - 1)   A(z) / (w1^(1-alpha) |Gbar|^alpha),
    where A(z) = sum_{i>=2} w_i |xh_i - z|^(p-2); in particular all
    eigenvalues are >= 1.  The explicit upper bound replaces |Gbar| by its
    distance-based lower bound and reads
        1 + C_p ((1-w1)/w1)^(1-alpha) (M(z)/|z - zbar|)^(p-2),
    with M(z) the largest anchor distance.  At p = 2 all four margins are
    zero: every bound collapses to the exact value 1/w1.
    """
    if cfg.p < 2.0 - P2_TOL:
        raise ValidationError("check_bounds_p_ge2 requires p >= 2")
    zb, _, _ = _as_batch(z, cfg.dim)
    eigs = grad_b_inverse_eigs(cfg, zb)
    emin, emax = eigs.min(axis=1), eigs.max(axis=1)
    lam1, a, p = cfg.lam1, cfg.alpha, cfg.p

    r_anchor = np.linalg.norm(
        zb[:, None, :] - cfg.anchors[None, :, :], axis=2
    )
    A = (cfg.weights[1:][None, :] * np.maximum(r_anchor, _GBAR_ZERO) ** (p - 2.0)).sum(
        axis=1
    )
    Gn = np.linalg.norm(gbar(cfg, zb), axis=1)
    with np.errstate(divide="ignore"):
        ratio = A / (lam1 ** (1.0 - a) * np.maximum(Gn, _GBAR_ZERO) ** a)
    ratio = np.where(Gn == 0.0, np.inf if p > 2.0 + P2_TOL else A / lam1, ratio)

    low_local = 1.0 + (1.0 - a) * ratio
    up_local = 1.0 + (p - 1.0) * ratio

    r_fix = np.linalg.norm(zb - cfg.fixed_point[None, :], axis=1)
    M = r_anchor.max(axis=1)
    with np.errstate(divide="ignore"):
        up_explicit = 1.0 + nonsharp_constant(p) * (
            (1.0 - lam1) / lam1
        ) ** (1.0 - a) * (M / np.maximum(r_fix, _GBAR_ZERO)) ** (p - 2.0)
    up_explicit = np.where(r_fix == 0.0, np.inf if p > 2.0 + P2_TOL else
                           up_explicit, up_explicit)

    m_low = emin - np.minimum(low_local, np.inf)
    m_unit = emin - 1.0
    m_up = up_local - emax
    m_upe = up_explicit - emax
    iw_low = int(np.argmin(np.minimum(m_unit, m_low)))
    iw_up = int(np.argmin(np.minimum(m_up, m_upe)))
    return EigBoundReportPGe2(
        lower_unit_margin=float(m_unit.min()),
        lower_local_margin=float(m_low.min()),
        upper_local_margin=float(m_up.min()),
        upper_explicit_margin=float(m_upe.min()),
        worst_z_lower=zb[iw_low],
        worst_z_upper=zb[iw_up],
        n_points=zb.shape[0],
    )


@dataclass(frozen=True)
class EigBoundReportPLt2:
    """Margins for the p < 2 bounds on eig(grad b^{-1} - Id) over a z batch.

    The "stated" band is
        (p-1) min_w (1-w1)^beta / w1^(1+beta) (|z-zbar|/m(z))^(2-p)
            <= eig - 1 <=
        (1+beta) (1-w1)^beta / w1^(1+beta) (M(z)/m(z))^(2-p),
    with m, M the smallest/largest anchor distance and min_w the smallest
    anchor weight.  The "local" band replaces the distance ratios by the exact
    quantities At(z) |Gbar(z)|^beta with At(z) = sum w_i |xh_i-z|^(p-2):
        (p-1)/w1^(1+beta) At |G|^beta <= eig - 1 <= (1+beta)/w1^(1+beta) At |G|^beta.
    """

    stated_lower_margin: float
    stated_upper_margin: float
    local_lower_margin: float
    local_upper_margin: float
    worst_z_stated_lower: np.ndarray
    n_points: int

    @property
    def stated_ok(self) -> bool:
        return self.stated_lower_margin >= -1e-9 and self.stated_upper_margin >= -1e-9

    @property
    def local_ok(self) -> bool:
        return self.local_lower_margin >= -1e-9 and self.local_upper_margin >= -1e-9


def check_bounds_p_lt2(cfg: DiracConfiguration, z) -> EigBoundReportPLt2:
    """Check the two-sided p < 2 bounds at points z (anchors excluded).

    Reports margins for both the distance-ratio ("stated") band and the
    sharper local band through At(z)|Gbar(z)|^beta.  The stated lower margin
    is known to go negative in a neighborhood of the fixed point zbar for
    N > 2: there eig - 1 decays like |z-zbar|^beta with beta = (2-p)/(p-1),
    which is strictly faster than the (2-p) rate the stated bound assumes.
    The local band holds everywhere.
    """
    if cfg.p >= 2.0 - P2_TOL:
        raise ValidationError("check_bounds_p_lt2 requires p < 2")
    zb, _, _ = _as_batch(z, cfg.dim)
    r_anchor = np.linalg.norm(zb[:, None, :] - cfg.anchors[None, :, :], axis=2)
    if np.any(r_anchor == 0.0):
        raise SingularPointError("p < 2 bounds are undefined at the anchors")
    eigs = grad_b_inverse_eigs(cfg, zb) - 1.0
    emin, emax = eigs.min(axis=1), eigs.max(axis=1)
    p, lam1, beta = cfg.p, cfg.lam1, cfg.beta
    m = r_anchor.min(axis=1)
    M = r_anchor.max(axis=1)
    r_fix = np.linalg.norm(zb - cfg.fixed_point[None, :], axis=1)
    wmin = float(cfg.weights[1:].min())
    pref = (1.0 - lam1) ** beta / lam1 ** (1.0 + beta)
    stated_low = (p - 1.0) * wmin * pref * (r_fix / m) ** (2.0 - p)
    stated_up = (1.0 + beta) * pref * (M / m) ** (2.0 - p)

    At = (cfg.weights[1:][None, :] * r_anchor ** (p - 2.0)).sum(axis=1)
    Gn = np.linalg.norm(gbar(cfg, zb), axis=1)
    loc = At * Gn ** beta / lam1 ** (1.0 + beta)
    local_low = (p - 1.0) * loc
    local_up = (1.0 + beta) * loc

    m_sl = emin - stated_low
    m_su = stated_up - emax
    m_ll = emin - local_low
    m_lu = local_up - emax
    return EigBoundReportPLt2(
        stated_lower_margin=float(m_sl.min()),
        stated_upper_margin=float(m_su.min()),
        local_lower_margin=float(m_ll.min()),
        local_upper_margin=float(m_lu.min()),
        worst_z_stated_lower=zb[int(np.argmin(m_sl))],
        n_points=zb.shape[0],
    )


@dataclass(frozen=True)
class SharpBandReport:
    """Scaled eigenvalues s(z) = w1^(1-alpha) |z-zbar|^alpha eig(grad b^{-1})
    over a dyadic radius sweep toward the fixed point (p > 2, anchors away
    from zbar).  The family must stay inside a fixed band [1/C, C]."""

    radii: np.ndarray
    s_min: float
    s_max: float
    band_constant: float
    n_directions: int

    def within(self, C: float) -> bool:
        return self.s_max <= C and self.s_min >= 1.0 / C


def sharp_band_p_gt2(cfg: DiracConfiguration, r_max: float, n_radii: int = 20,
                     n_directions: int = 32) -> SharpBandReport:
    """Sweep radii r_max * 2^(-k), k = 1..n_radii, around the fixed point.

    Verifies the compact-set two-sided behavior for p > 2 when zbar is not an
    anchor: eigenvalues grow like |z - zbar|^(-alpha), so the scaled family
    s(z) is bounded above and below.  Returns the observed extremes; callers
    freeze an acceptable band constant.
    """
    if cfg.p <= 2.0 + P2_TOL:
        raise ValidationError("sharp band sweep requires p > 2")
    dirs = _directions(cfg.dim, n_directions)
    radii = r_max * 2.0 ** (-np.arange(1, n_radii + 1, dtype=float))
    zc = cfg.fixed_point
    lam1, a = cfg.lam1, cfg.alpha
    s_lo, s_hi = np.inf, -np.inf
    for r in radii:
        zs = zc[None, :] + r * dirs
        eigs = grad_b_inverse_eigs(cfg, zs)
        s = lam1 ** (1.0 - a) * r ** a * eigs
        s_lo = min(s_lo, float(s.min()))
        s_hi = max(s_hi, float(s.max()))
    return SharpBandReport(
        radii=radii,
        s_min=s_lo,
        s_max=s_hi,
        band_constant=max(s_hi, 1.0 / s_lo),
        n_directions=len(dirs),
    )


# ---------------------------------------------------------------------------
# pushforward density and L^q quantities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PushforwardResult:
    """Grid image of the barycenter density g_p = (f_1 o b^{-1}) |det grad b^{-1}|.

    mass_ok is False when the grid mass deviates from 1 by more than 5%,
    which signals under-resolution (or genuine non-integrability near a
    singular point).
    """

    density: GridDensity
    mass: float
    mass_ok: bool
    singular_cells: int


def _singular_points(cfg: DiracConfiguration):
    if cfg.p > 2.0 + P2_TOL:
        return cfg.fixed_point[None, :]
    if cfg.p < 2.0 - P2_TOL:
        return cfg.anchors
    return np.empty((0, cfg.dim))


def _image_box(cfg: DiracConfiguration, source_box: np.ndarray,
               tol: float) -> np.ndarray:
    """Bounding box of b(source box) via boundary sampling (exact for p=2)."""
    d = cfg.dim
    if abs(cfg.p - 2.0) <= P2_TOL:
        shift = (cfg.weights[1:, None] * cfg.anchors).sum(axis=0)
        return cfg.lam1 * source_box + shift[:, None]
    if d == 1:
        corners = source_box.T.reshape(-1, 1)
        img = b_forward(cfg, corners, tol=tol)
        return np.array([[img.min(), img.max()]])
    # Sample every face of the box on a lattice (includes all corners).
    n = 33
    axes = [np.linspace(source_box[a, 0], source_box[a, 1], n) for a in range(d)]
    pts = []
    for a in range(d):
        other = [axes[b] for b in range(d) if b != a]
        mesh = np.meshgrid(*other, indexing="ij")
        face = np.stack([m.ravel() for m in mesh], axis=-1)
        for side in (source_box[a, 0], source_box[a, 1]):
            full = np.empty((face.shape[0], d))
            full[:, a] = side
            cols = [b for b in range(d) if b != a]
            full[:, cols] = face
            pts.append(full)
    img = b_forward(cfg, np.vstack(pts), tol=tol)
    return np.stack([img.min(axis=0), img.max(axis=0)], axis=1)


def _density_at(cfg: DiracConfiguration, f1: GridDensity, zs: np.ndarray):
    x = b_inverse(cfg, zs)
    vals = f1.evaluate(x)
    out = np.zeros(zs.shape[0])
    pos = vals > 0.0
    if pos.any():
        out[pos] = vals[pos] * jacobian_det(cfg, zs[pos])
    return out


def pushforward_density(cfg: DiracConfiguration, f1: GridDensity,
                        resolution=None, target_box=None,
                        solver_tol=DEFAULT_TOL,
                        singular_radius_rel=1e-6,
                        subsample=6) -> PushforwardResult:
    """Pushforward of the density f1 under b, on a grid over b(spt f1).

    Each target cell gets g_p evaluated at its center through the closed-form
    inverse.  Cells within singular_radius_rel * scale of a singular point
    (zbar for p > 2, anchors for p < 2) are refined on a subsample^d
    subgrid and averaged instead, skipping subsample points that fall within
    1e-12 * scale of the singularity.
    """
    if f1.dim != cfg.dim:
        raise ValidationError("density dimension does not match configuration")
    if resolution is None:
        resolution = f1.resolution
    if target_box is None:
        target_box = _image_box(cfg, f1.support_box(), solver_tol)
    target_box = np.atleast_2d(np.asarray(target_box, dtype=float))
    out = GridDensity(target_box, np.zeros(
        resolution if not np.isscalar(resolution) else (int(resolution),) * cfg.dim
    ))
    centers = out.centers()
    scale = max(cfg.geometry_scale,
                float(np.max(target_box[:, 1] - target_box[:, 0])))
    sing = _singular_points(cfg)
    values = np.zeros(centers.shape[0])
    if sing.shape[0]:
        dist = np.linalg.norm(
            centers[:, None, :] - sing[None, :, :], axis=2
        ).min(axis=1)
        excl = dist <= singular_radius_rel * scale + 0.5 * np.linalg.norm(
            out.cell_widths
        )
    else:
        excl = np.zeros(centers.shape[0], bool)
    regular = ~excl
    if regular.any():
        values[regular] = _density_at(cfg, f1, centers[regular])
    n_sing = int(excl.sum())
    if n_sing:
        h = out.cell_widths
        offs = (np.arange(subsample) + 0.5) / subsample
        mesh = np.meshgrid(*([offs] * cfg.dim), indexing="ij")
        rel = np.stack([m.ravel() for m in mesh], axis=-1)  # (sub^d, d)
        for idx in np.where(excl)[0]:
            lo = centers[idx] - 0.5 * h
            pts = lo[None, :] + rel * h[None, :]
            dd = np.linalg.norm(
                pts[:, None, :] - sing[None, :, :], axis=2
            ).min(axis=1)
            keep = dd > 1e-12 * scale
            if keep.any():
                values[idx] = _density_at(cfg, f1, pts[keep]).mean()
    dens = GridDensity(target_box, values.reshape(out.resolution))
    mass = dens.mass()
    return PushforwardResult(
        density=dens,
        mass=mass,
        mass_ok=abs(mass - 1.0) <= 0.05,
        singular_cells=n_sing,
    )


def lq_norm(density: GridDensity, q: float) -> float:
    """L^q norm of a grid density (cell quadrature)."""
    return density.lq_norm(q)


def lq_power_via_changevar(cfg: DiracConfiguration, f1: GridDensity, q: float,
                           solver_tol=DEFAULT_TOL) -> float:
    """integral of g_p^q computed on the source side:

        int f1(x)^q * J(b(x))^(q-1) dx,    J = |det grad b^{-1}|.

    This avoids the target grid entirely and is the measurement route used
    to validate integrability bounds.
    """
    if q <= 1.0:
        raise ValidationError(f"q must exceed 1, got {q}")
    mask = f1.values.ravel() > 0.0
    if not mask.any():
        return 0.0
    xs = f1.centers()[mask]
    vals = f1.values.ravel()[mask]
    zs = b_forward(cfg, xs, tol=solver_tol)
    J = jacobian_det(cfg, zs)
    return float((vals ** q * J ** (q - 1.0)).sum() * f1.cell_volume)


def lq_via_changevar(cfg: DiracConfiguration, f1: GridDensity, q: float,
                     solver_tol=DEFAULT_TOL) -> float:
    """L^q norm of the pushforward density via the change-of-variables route."""
    return lq_power_via_changevar(cfg, f1, q, solver_tol) ** (1.0 / q)


# ---------------------------------------------------------------------------
# blow-up exponent
# ---------------------------------------------------------------------------


def _directions(d: int, n: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        th = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    # Fibonacci sphere for d = 3; higher d: normalized Halton-free fallback
    if d == 3:
        k = np.arange(n) + 0.5
        phi = np.arccos(1.0 - 2.0 * k / n)
        theta = np.pi * (1.0 + math.sqrt(5.0)) * k
        return np.stack(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta),
             np.cos(phi)], axis=-1,
        )
    rng = np.random.default_rng(0)
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass(frozen=True)
class BlowupReport:
    """Log-log fit of the pushforward density along shrinking annuli.

    slope : fitted d(log g)/d(log r) at the given center
    q0 : critical integrability index d / |slope| (inf if the slope is ~0
        or positive); g_p belongs to L^q exactly for q < q0
    verdicts : {q: bool} integrability verdicts for the requested q values
    borderline : set of q within 10% of q0, where the verdict is fragile
    """

    slope: float
    q0: float
    radii_used: np.ndarray
    annulus_means: np.ndarray
    verdicts: dict
    borderline: tuple
    n_directions: int


def blowup_exponent(cfg: DiracConfiguration, f1: GridDensity, center,
                    radii, q_values=(), n_directions=64,
                    min_usable=4) -> BlowupReport:
    """Fit the local power-law exponent of g_p around a singular center.

    For each radius, g_p is evaluated at deterministic points on the sphere
    of that radius and averaged; radii where fewer than 90% of the samples
    carry positive density (the preimage left spt f1) are discarded.  An
    ordinary least-squares line through (log r, log mean) gives the local
    exponent; fewer than min_usable usable radii raise
    InsufficientDataError.
    """
    center = np.asarray(center, dtype=float).ravel()
    radii = np.asarray(radii, dtype=float).ravel()
    if radii.size < 6:
        raise ValidationError("supply at least 6 candidate radii")
    dirs = _directions(cfg.dim, n_directions)
    used, means = [], []
    for r in radii:
        zs = center[None, :] + r * dirs
        g = _density_at(cfg, f1, zs)
        pos = g > 0.0
        if pos.sum() < 0.9 * len(dirs):
            continue
        used.append(r)
        means.append(float(g[pos].mean()))
    if len(used) < min_usable:
        raise InsufficientDataError(
            f"only {len(used)} of {radii.size} annuli usable "
            f"(need {min_usable}); center likely too close to the boundary "
            "of the image region"
        )
    lr = np.log(np.asarray(used))
    lm = np.log(np.asarray(means))
    slope = float(np.polyfit(lr, lm, 1)[0])
    if slope < -1e-12:
        q0 = cfg.dim / abs(slope)
    else:
        q0 = math.inf
    verdicts = {float(q): bool(q < q0) for q in q_values}
    borderline = tuple(
        float(q) for q in q_values
        if math.isfinite(q0) and abs(q - q0) <= 0.1 * q0
    )
    return BlowupReport(
        slope=slope,
        q0=q0,
        radii_used=np.asarray(used),
        annulus_means=np.asarray(means),
        verdicts=verdicts,
        borderline=borderline,
        n_directions=len(dirs),
    )
