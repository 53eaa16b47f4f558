"""Hybrid continuous/discrete nonlinear observers for strapdown inertial navigation,
with numerical contraction certificates and a scenario runner."""
from .errors import (
    ConfigError,
    EmptyCandidates,
    GimbalLock,
    HybridNavError,
    MissingAccumulator,
    NonFiniteState,
    NonUnitQuaternion,
    SchemaMismatch,
    SingularBeaconGeometry,
    SingularMetric,
    UncertifiedGain,
)
from .harness import RunSummary, run_scenario
from .observer import HierarchicalObserver, ObserverConfig
from .report import compare_runs
from .scenario import ScenarioConfig, load as load_scenario

__version__ = "0.1.0"
