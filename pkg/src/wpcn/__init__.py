"""Resource allocation for cooperative multi-cluster wireless-powered networks.

A hybrid access point (HAP) beamforms RF energy to battery-less users grouped
in clusters; users transmit uplink data to the HAP and to their cluster head
(CH), which relays for them.  This package jointly optimizes the energy
beamforming covariance, the user/CH transmit covariances and the phase
durations for max-min or sum throughput, by alternating optimization over
minorize-maximize conic subproblems, and ships a Monte-Carlo experiment
harness for the standard scenario sweeps.
"""

from .model import (
    EhParams,
    GeometrySpec,
    NetworkConfig,
    build_geometry,
    build_disk_geometry,
    sample_channels,
)
from .physics import Allocation, ThroughputReport, throughput_report
from .optimizer import SolveOptions, SolveTrace, initialize, run, run_noncooperative

__all__ = [
    "EhParams",
    "GeometrySpec",
    "NetworkConfig",
    "build_geometry",
    "build_disk_geometry",
    "sample_channels",
    "Allocation",
    "ThroughputReport",
    "throughput_report",
    "SolveOptions",
    "SolveTrace",
    "initialize",
    "run",
    "run_noncooperative",
]
