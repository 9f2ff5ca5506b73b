from .dictionary import DictionaryState
from .experiment import (
    DictionaryParams,
    ExperimentConfig,
    Method,
    ProblemKind,
    PropertyParams,
    ResultRow,
    ResultTable,
    SGParams,
)
from .network import (
    AuxVars,
    BeamformerState,
    ChannelModel,
    ChannelRealization,
    CsiParams,
    MeanChannelVariant,
    NetworkConfig,
    PathLossParams,
    Precoders,
)
from .trace import TRACE_COLUMNS, RunTrace, TraceRecord

__all__ = [
    "AuxVars",
    "BeamformerState",
    "ChannelModel",
    "ChannelRealization",
    "CsiParams",
    "DictionaryParams",
    "DictionaryState",
    "ExperimentConfig",
    "MeanChannelVariant",
    "Method",
    "NetworkConfig",
    "PathLossParams",
    "Precoders",
    "ProblemKind",
    "PropertyParams",
    "ResultRow",
    "ResultTable",
    "RunTrace",
    "SGParams",
    "TRACE_COLUMNS",
    "TraceRecord",
]
