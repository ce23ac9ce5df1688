"""Deterministic multipath transport simulator.

Simulates one-stream downloads over multiple network paths under either a
single shared packet number space or one space per path, with byte-exact
acknowledgment frames, configurable acknowledgment policies, RACK-style
loss detection, and Cubic or BBR congestion control.  The harness side
generates space-filling scenario designs, runs batches, and reports CSVs
and plots.
"""

from .acktrack import AckPolicy, AckTracker, RangeSet, select_ranges
from .cc import BbrCongestionControl, CubicCongestionControl, make_controller
from .endpoint import CLIENT, SERVER, Endpoint, EndpointConfig, Packet
from .metrics import MetricsCollector, RunMetrics, extract_metrics
from .netsim import EventQueue, Link, buffer_capacity, make_path_links
from .path import CidRegistry, PathManager, PathState, negotiate
from .runner import (
    RunConfig,
    Simulation,
    config_from_scenario,
    configs_for_family,
    reorder_walkthrough,
    run_many,
    run_scenario,
)
from .scenarios import (
    DEFAULT_TRANSFER_BYTES,
    DESK_TRANSFER_BYTES,
    FAMILIES,
    PathConfig,
    Scenario,
    design_scenarios,
    hetero2_paths,
    hetero3_paths,
    homo2_paths,
)
from .sendtrack import (
    MULTI_SPACE,
    SINGLE_SPACE,
    RttEstimator,
    SenderTracker,
    compute_nonce,
)
from .trace import TraceRecorder, read_trace
from .wsp import wsp_design

__version__ = "0.1.0"

__all__ = [
    "AckPolicy",
    "AckTracker",
    "BbrCongestionControl",
    "CLIENT",
    "CidRegistry",
    "CubicCongestionControl",
    "DEFAULT_TRANSFER_BYTES",
    "DESK_TRANSFER_BYTES",
    "Endpoint",
    "EndpointConfig",
    "EventQueue",
    "FAMILIES",
    "Link",
    "MULTI_SPACE",
    "MetricsCollector",
    "Packet",
    "PathConfig",
    "PathManager",
    "PathState",
    "RangeSet",
    "RttEstimator",
    "RunConfig",
    "RunMetrics",
    "SERVER",
    "SINGLE_SPACE",
    "Scenario",
    "SenderTracker",
    "Simulation",
    "TraceRecorder",
    "buffer_capacity",
    "compute_nonce",
    "config_from_scenario",
    "configs_for_family",
    "design_scenarios",
    "extract_metrics",
    "hetero2_paths",
    "hetero3_paths",
    "homo2_paths",
    "make_controller",
    "make_path_links",
    "negotiate",
    "read_trace",
    "reorder_walkthrough",
    "run_many",
    "run_scenario",
    "select_ranges",
    "wsp_design",
]
