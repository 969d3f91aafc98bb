"""Support-function calculus on the unit circle and sphere.

A numerical toolkit for smooth strictly convex bodies described by their
support function: quadrature grids with covariant derivatives, the full
pointwise curvature package (principal radii, elementary symmetric
functions, Gauss curvature), mixed discriminants and mixed volumes,
verification of the quadratic mixed-volume and spectral inequalities with
equality-case witnesses, and a stabilized geometric flow that solves
isotropic curvature equations (K^alpha = h, K = h^{1-p},
h sigma_k = phi(h, |Dh|)) and certifies the limits as centred spheres or
centred ellipsoids.
"""

__version__ = "0.1.0"

from .bodies import BodySpec, convexity_margin, make_body, make_random
from .calculus import (
    BodyGeometry,
    NonConvexError,
    NonPositiveError,
    assemble,
    embedding_check,
    pointwise_identity_report,
)
from .flow import (
    FlowResult,
    NoConvergenceError,
    ProblemSpec,
    StepCollapseError,
    certify,
    ellipsoid_distance,
    run,
    sphere_distance,
)
from .grid import Grid, ScalarField, build_grid, grad, hess, integrate, laplacian
from .inequalities import (
    SlackReport,
    af_local,
    affine_identity,
    main_lemma,
    p_chain,
    poincare,
    run_suite,
    saroglou_sign,
    spectral_gap,
    theorem11_chain,
    witness_function,
    xi_identity,
)
from .integrals import (
    ConstantsTable,
    MixedVolumeResult,
    body_volume,
    calibrate_constants,
    centroid_point,
    centroid_vector,
    mixed_discriminant,
    mixed_volume,
    mixed_volume_padded,
)
from .nonlinearity import PhiSpec, gaussian_phi, power_phi

__all__ = [name for name in dir() if not name.startswith("_")]
