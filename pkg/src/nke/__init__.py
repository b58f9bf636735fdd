"""nke: exact infinite-width neural kernels and randomized feature embeddings.

The library computes dual activation kernels (closed form, quadrature, or
truncated-expansion), NNGP/NTK recursions for fully-connected and
convolutional architectures, and sketch-based low-dimensional feature maps
whose inner products approximate those kernels.
"""

from .errors import (
    BadParams,
    DegreeOverflow,
    DegreeTooLarge,
    DimensionMismatch,
    DomainError,
    EigenFailure,
    NkeError,
    NonFiniteActivation,
    NonFiniteKernel,
    NotHomogeneous,
    NotSymmetric,
    ShapeMismatch,
    SingularSystem,
    UnknownActivation,
    ZeroDenominator,
    ZeroNormInput,
)
from .hermite import (
    HermiteCoeffs,
    QuadratureRule,
    gauss_hermite_rule,
    half_gauss_rule,
    hermite_eval,
    hermite_expand,
    hermite_series_to_poly,
    monomial_to_hermite,
)
from .series import (
    RadialTable,
    dual_kernel_hermite,
    dual_kernel_poly,
    hermite_dual_gram,
    hermite_radial_factor,
    hermite_tail_mass,
    radial_factor,
    radial_table,
    truncation_error_bound_general,
    truncation_error_bound_relu,
    truncation_error_bound_smooth,
)
from .duals import (
    ActivationSpec,
    DualActivation,
    abrelu_fit_normalized_gaussian,
    activation_lookup,
    affine_dual,
    catalog_lookup,
    catalog_names,
    derivative_dual_numeric,
    gauss_hermite_dual,
    gauss_hermite_mean,
    normalize_dual,
)
from .fc_kernels import (
    KernelConfig,
    KernelMatrix,
    kernel_matrix,
    nngp_homogeneous,
    nngp_ntk_pair,
    ntk_homogeneous,
)
from .embed import (
    ComposedPoly,
    EmbedConfig,
    compose_poly,
    embed_dataset,
    embed_point,
    feature_degrees,
    ntk_poly,
    taylor_normalized_gaussian,
)
from .polysketch import (
    PolySketchTree,
    SrhtInstance,
    TensorSrhtInstance,
    polysketch_power,
    polysketch_powers,
    polysketch_tensor,
    polysketch_tree,
    srht_apply,
    srht_instance,
    tensor_srht_apply,
    tensor_srht_instance,
)
from .cntk import (
    CntkConfig,
    cntk_exact,
    cntk_exact_homogeneous,
    cntk_kernel_matrix,
    cntk_sketch_features,
)
from .metrics import (
    RidgeResult,
    lambda_grid,
    monte_carlo_dual,
    relative_frobenius_error,
    ridge_regress,
    statistical_dimension,
)
from .dataio import (
    read_csv_matrix,
    read_image,
    read_matrix,
    read_nke1,
    write_csv_matrix,
    write_image,
    write_matrix,
    write_nke1,
)

__version__ = "0.1.0"
