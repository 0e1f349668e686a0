"""Universal one-bit compressive sensing built on robust union-free families."""
from .family import (
    FamilyError,
    RuffParams,
    SetFamily,
    ViolationWitness,
    family_stats,
    pairwise_certificate,
    verify_ruff,
    verify_uff,
)
from .constructions import (
    Code,
    ConstructionError,
    RandomRuffConfig,
    design_from_code,
    lift_k1_params,
    reed_solomon_code,
    sample_random_ruff,
)
from .sensing import SensingMatrix, SignPattern, SparseVector, generate_signal, matrix_from_family, measure
from .recovery import ApproxConfig, angular_error, approx_recover, gaussian_stage, recover_support
from .bounds import (
    BoundReport,
    confusable_pair_nonneg,
    confusable_pair_real,
    cover_lower,
    extract_family,
    furedi_max_n,
    gv_count,
    min_m_approx,
    min_m_support,
    regions_upper,
)

__version__ = "0.1.0"
