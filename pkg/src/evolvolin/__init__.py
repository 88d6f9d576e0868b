"""Evolution of sparse linear functions under smooth and incoherent distributions."""
from .core_model import (
    CovarianceModel,
    DegenerateSubsetError,
    DimensionMismatchError,
    ProblemParams,
    ProjectionResult,
    SparseVector,
    TargetFunction,
    best_projection,
    expected_loss,
    inner_product,
    lemma1_check,
)
from .distributions import (
    DistributionHandle,
    LowRankUniform,
    PointMass,
    Rademacher,
    SampleBatch,
    UniformBox,
    check_niceness,
    make_incoherent,
    make_smooth,
    sample,
)

__version__ = "0.1.0"
