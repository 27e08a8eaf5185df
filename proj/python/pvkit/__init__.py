"""Point-voxel convolutions, sparse point-voxel convolutions and 3D NAS.

Thin Python layer over the C++ core. Point clouds, dense and sparse voxel
ops, segmentation models, the search space, evolutionary search and the
latency predictor are exposed directly; ``run_cli`` runs any ``pvkit``
command in-process.
"""

from ._pvkit import (
    ConfigError,
    ContractError,
    DimensionError,
    InfeasibleError,
    IoError,
    LatencyPredictor,
    Model,
    ParseError,
    PointCloud,
    PvkitError,
    SearchSpace,
    TrainingError,
    class_names,
    conv3d,
    count_distinguishable,
    default_model_config,
    devoxelize,
    evaluate_labels,
    evolutionary_search,
    generate_scene,
    generate_scene_with_points,
    load_latency_pairs,
    run_cli,
    sparse_conv,
    sparse_voxelize,
    voxelize,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
