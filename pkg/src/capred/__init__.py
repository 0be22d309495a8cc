"""Capacity of positive unital trace-preserving maps on finite-dimensional
C*-algebras, computed by reduction to ergodic corner maps."""

from .algebra import (
    AlgebraShape,
    CornerEmbedding,
    Element,
    Spectrum,
    State,
    compress,
    diagonal_projection,
    entropy,
    eta,
    haar_unitary,
    hs_inner,
    random_hermitian,
    random_state,
    spectral_decompose,
)
from .basis import HermitianBasis, coords_to_element, element_to_coords
from .capacity import (
    CapacityResult,
    Ensemble,
    OptimizerSettings,
    blahut_arimoto,
    brute_force_capacity,
    capacity_at,
    holevo_chi,
    optimize_capacity,
)
from .definite import (
    DefiniteSet,
    Partition,
    corner_map,
    definite_set,
    extract_partition,
    gram_form,
    is_ergodic,
    sandwich_identity_check,
)
from .errors import (
    CapredError,
    CertificateError,
    DomainError,
    ExtractionError,
    InconsistencyError,
    ParseError,
    ShapeError,
)
from .maps import (
    PtpuMap,
    adjoint_map,
    compose_maps,
    direct_sum,
    identity_map,
    make_classical_stochastic,
    make_convex_combination,
    make_depolarize_corner,
    make_pinching,
    make_unitary_conjugation,
    random_cp_map,
    tensor_elements,
    tensor_product,
    tensor_shape,
)
from .reduction import (
    AdditivityReport,
    PinchingEntropyReport,
    ReductionTree,
    RestrictionReport,
    TensorIdentityReport,
    additivity_experiment,
    pinching_entropy_check,
    pinching_entropy_suite,
    projection_map_capacity,
    reduce_capacity,
    restricted_map,
    restriction_equality,
    tensor_with_identity,
)

__version__ = "0.1.0"

__all__ = [
    "AlgebraShape", "Element", "State", "Spectrum", "CornerEmbedding",
    "hs_inner", "entropy", "eta", "spectral_decompose", "compress",
    "random_hermitian", "random_state", "haar_unitary", "diagonal_projection",
    "HermitianBasis", "element_to_coords", "coords_to_element",
    "PtpuMap", "identity_map", "make_pinching", "make_unitary_conjugation",
    "make_depolarize_corner", "make_classical_stochastic", "make_convex_combination",
    "compose_maps", "direct_sum", "tensor_product", "tensor_shape", "tensor_elements",
    "adjoint_map", "random_cp_map",
    "DefiniteSet", "Partition", "gram_form", "definite_set", "is_ergodic",
    "extract_partition", "corner_map", "sandwich_identity_check",
    "Ensemble", "CapacityResult", "OptimizerSettings", "holevo_chi", "capacity_at",
    "optimize_capacity", "blahut_arimoto", "brute_force_capacity",
    "ReductionTree", "RestrictionReport", "PinchingEntropyReport",
    "AdditivityReport", "TensorIdentityReport",
    "reduce_capacity", "restricted_map", "restriction_equality",
    "pinching_entropy_check", "pinching_entropy_suite", "projection_map_capacity",
    "additivity_experiment", "tensor_with_identity",
    "CapredError", "ShapeError", "DomainError", "CertificateError",
    "ExtractionError", "InconsistencyError", "ParseError",
]
