"""Room-occupancy forecasting from building telemetry, and the HVAC energy
savings an occupancy-prediction-based controller would capture over a
rule-based baseline.

The pieces compose left to right: ingest or generate per-minute telemetry
(:mod:`occucast.timeseries`, :mod:`occucast.synthgen`), train the recurrent
forecaster (:mod:`occucast.lstm`), score it over future-window horizons
(:mod:`occucast.metrics`), and convert predictions into energy numbers
(:mod:`occucast.energy`). The ``occucast`` command wires them together.
"""

from .energy import (
    EnergyConfig,
    EnergySeries,
    RoomSavings,
    SavingsReport,
    estimate_savings,
    format_savings_csv,
    savings_report,
    select_setpoint,
    simulate_rbc,
    step_energy,
)
from .lstm import (
    AdamState,
    LstmParams,
    LstmState,
    SavedModel,
    StepCache,
    TrainConfig,
    adam_update,
    backward_segment,
    bce_loss,
    init_adam,
    init_params,
    load_model,
    lstm_step,
    predict_head,
    predict_series,
    save_model,
    train,
    zero_state,
)
from .metrics import (
    MetricsReport,
    auroc,
    average_precision,
    evaluate,
    format_metrics_csv,
    mean_bce,
)
from .synthgen import GenConfig, generate
from .timeseries import (
    SUPPORTED_WINDOWS,
    Dataset,
    EventRecord,
    FeatureMatrix,
    FeatureVector,
    NormStats,
    aggregate_target,
    aggregate_targets,
    apply_normalizer,
    engineer_features,
    fit_normalizer,
    invert_normalizer,
    load_csv,
    split_train_test,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Dataset",
    "EnergyConfig",
    "EnergySeries",
    "EventRecord",
    "FeatureMatrix",
    "FeatureVector",
    "GenConfig",
    "LstmParams",
    "LstmState",
    "MetricsReport",
    "NormStats",
    "RoomSavings",
    "SavedModel",
    "SavingsReport",
    "StepCache",
    "SUPPORTED_WINDOWS",
    "TrainConfig",
    "adam_update",
    "aggregate_target",
    "aggregate_targets",
    "apply_normalizer",
    "auroc",
    "average_precision",
    "backward_segment",
    "bce_loss",
    "engineer_features",
    "estimate_savings",
    "evaluate",
    "fit_normalizer",
    "format_metrics_csv",
    "format_savings_csv",
    "generate",
    "init_adam",
    "init_params",
    "invert_normalizer",
    "load_csv",
    "load_model",
    "lstm_step",
    "mean_bce",
    "predict_head",
    "predict_series",
    "save_model",
    "savings_report",
    "select_setpoint",
    "simulate_rbc",
    "split_train_test",
    "step_energy",
    "train",
    "zero_state",
]
