"""Online anomaly detection from RLS-identified ARX models of signal pairs."""
from rlsad.arx_rls import ArxOrder, RegressorBuffer, RLSEstimator, build_regressor, init_rls
from rlsad.detector import ChannelConfig, ChannelDetector, DetectionEvent, Phase, aggregate
from rlsad.online_stats import RunningStats

__version__ = "0.1.0"

__all__ = [
    "ArxOrder",
    "ChannelConfig",
    "ChannelDetector",
    "DetectionEvent",
    "Phase",
    "RLSEstimator",
    "RegressorBuffer",
    "RunningStats",
    "aggregate",
    "build_regressor",
    "init_rls",
]
