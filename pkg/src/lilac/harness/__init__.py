from .config import VARIANTS, WORKLOADS, ConfigError, ExperimentConfig
from .metrics import MetricsRow, Recorder
from .runner import Cluster, LivenessViolation, RunResult, SafetyReport, SafetyViolation, run
from .serializability import Verdict, check_serializability, version_order
from .sweep import sweep, write_sweep

__all__ = [
    "VARIANTS", "WORKLOADS", "ConfigError", "ExperimentConfig", "MetricsRow", "Recorder",
    "Cluster", "LivenessViolation", "RunResult", "SafetyReport", "SafetyViolation", "run",
    "Verdict", "check_serializability", "version_order", "sweep", "write_sweep",
]
