"""Gated temporal meta-learning for temporal knowledge graph completion."""

from ._tempo_meta import (
    Ablation,
    Error,
    GateSet,
    HistoryMode,
    MetaConfig,
    MetaState,
    NumericError,
    Optimizer,
    ParamSet,
    ParseError,
    RangeError,
    RegimeSpec,
    RunMode,
    ShapeError,
    Split,
    TemporalKG,
    build_history_index,
    build_temporal_kg,
    changepoint_at,
    compute_metrics,
    compute_split,
    evaluate,
    generate,
    gradcheck,
    init_params,
    init_support_params,
    load_checkpoint,
    loss,
    loss_and_grad,
    parse_quadruples,
    pessimistic_rank,
    report,
    run_experiment,
    save_checkpoint,
    score,
    train,
)

__version__ = "0.1.0"
