from .algorithms import (
    VALID_METHODS,
    GlobalClockView,
    SyncConfig,
    SyncMethodError,
    SyncOutcome,
    compute_rtt,
    hca_sync,
    jk_sync,
    measure_global_offsets,
    netgauge_sync,
    run_sync,
    skampi_pingpong,
    skampi_sync,
)
from .models import (
    IDENTITY_MODEL,
    DegenerateFitError,
    FitPoint,
    LinearModel,
    ModelInterval,
    denormalize_time,
    fit_xy,
    linear_fit,
    merge_lms,
    merge_model_intervals,
    normalize_time,
)

__all__ = [
    "DegenerateFitError",
    "FitPoint",
    "GlobalClockView",
    "IDENTITY_MODEL",
    "LinearModel",
    "ModelInterval",
    "SyncConfig",
    "SyncMethodError",
    "SyncOutcome",
    "VALID_METHODS",
    "compute_rtt",
    "denormalize_time",
    "fit_xy",
    "hca_sync",
    "jk_sync",
    "linear_fit",
    "measure_global_offsets",
    "merge_lms",
    "merge_model_intervals",
    "netgauge_sync",
    "normalize_time",
    "run_sync",
    "skampi_pingpong",
    "skampi_sync",
]
