"""wbary: p-Wasserstein barycenters, multi-marginal transport, and density bounds."""

from .core import (
    BarycenterSolution,
    CurvatureBlocks,
    WeightedPointConfig,
    alpha_exponent,
    beta_exponent,
    curvature_blocks,
    dbary_dxi,
    el_residual,
    pbary_points,
    pbary_solve,
)
from .grid import GridDensity, radial_bump, uniform_ball, uniform_box
from .semidiscrete import (
    BlowupReport,
    DiracConfiguration,
    EigBoundReportPGe2,
    EigBoundReportPLt2,
    PushforwardResult,
    SharpBandReport,
    b_forward,
    b_inverse,
    blowup_exponent,
    check_bounds_p_ge2,
    check_bounds_p_lt2,
    gbar,
    grad_b_inverse,
    grad_b_inverse_eigs,
    jacobian_det,
    lq_norm,
    lq_power_via_changevar,
    lq_via_changevar,
    nonsharp_constant,
    pushforward_density,
    sharp_band_p_gt2,
)
from .mmot import (
    CostTensor,
    DiscreteMeasure,
    DualReport,
    EquivalenceReport,
    MonotonicityReport,
    TransportPlan,
    barycenter_measure,
    check_cp_monotone,
    cost_tensor,
    dual_check_potentials,
    solve_mmot,
    verify_c2m_equivalence,
    wp_distance,
)
from .bounds import (
    GeneralLqReport,
    InjectivityReport,
    SupportGeometry,
    compute_D,
    compute_geometry,
    compute_m,
    constant_maps,
    general_lq_bound,
    identity_maps,
    integrability_bound,
    local_injectivity_check,
)
from .affine import (
    AffineBarycenterResult,
    AffineMap,
    AffineMmotReport,
    ConcavityReport,
    PTransformResult,
    SpectrumVerdict,
    affine_barycenter,
    homogeneous_transform_coefficient,
    matrix_pbary,
    p_concavity_check,
    p_transform,
    spectrum_optimality,
    verify_affine_vs_mmot,
)
from .errors import (
    ConvergenceError,
    GeometryError,
    InsufficientDataError,
    SingularBlockError,
    SingularPointError,
    StructureError,
    ValidationError,
    WbaryError,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
