"""Python interface to the swag library."""

from ._swag import (
    Camera,
    DataError,
    Dataset,
    DimensionMismatch,
    Error,
    NumericError,
    Scene,
    TrainConfig,
    TrainState,
    concrete_cdf,
    evaluate,
    evaluate_training_views,
    export_bundle,
    import_bundle,
    load_checkpoint,
    load_dataset,
    psnr,
    sample_concrete,
    set_thread_count,
    ssim,
    synthetic,
    thread_count,
    train,
)

__all__ = [
    "Camera",
    "DataError",
    "Dataset",
    "DimensionMismatch",
    "Error",
    "NumericError",
    "Scene",
    "TrainConfig",
    "TrainState",
    "concrete_cdf",
    "evaluate",
    "evaluate_training_views",
    "export_bundle",
    "import_bundle",
    "load_checkpoint",
    "load_dataset",
    "psnr",
    "sample_concrete",
    "set_thread_count",
    "ssim",
    "synthetic",
    "thread_count",
    "train",
]
