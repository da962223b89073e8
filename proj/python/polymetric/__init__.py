"""Per-cluster LMNN metrics fused into a smooth invertible warp, with k-NN on top."""

from ._polymetric import (
    Atlas,
    Model,
    PolymetricError,
    cross_validate,
    geodesic_interp,
    is_singular,
    knn_classify,
    mat_exp,
    mat_log,
    project_to_glplus,
    synth_stripes,
    train_lmnn,
)

__all__ = [
    "Atlas",
    "Model",
    "PolymetricError",
    "cross_validate",
    "geodesic_interp",
    "is_singular",
    "knn_classify",
    "mat_exp",
    "mat_log",
    "project_to_glplus",
    "synth_stripes",
    "train_lmnn",
]
