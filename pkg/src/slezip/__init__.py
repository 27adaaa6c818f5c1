"""Loewner chains, log-correlated fields and Gaussian multiplicative chaos.

Modules
-------
loewner   discrete Loewner chains, traces and zip/unzip maps
fields    probe covariances and sampling of log-correlated fields
chaos     chaos measures, moments and coordinate-change checks
natural   Minkowski content and the boundary-chaos curve measure
zipper    quantum zipper experiments
cli       batch experiment driver
"""

__version__ = "0.1.0"

from .chaos import (AtomicMeasure, GmcSpec, expected_mass, gmc_converged, gmc_measure,
                    invariance_check, moment_estimate, recover_reference)
from .errors import SlezipError
from .fields import (ChainPullback, CovarianceModel, ProbeSet, ScalingMap, joint_covariance,
                     kernel, khat, probe_covariance, probe_means, sample_probes)
from .loewner import (DrivingPath, MapChain, TraceSample, compute_trace, refine_trace,
                      sample_sle_driving, unzip_map, unzipped_trace, zip_map)
from .natural import (QuantumTimeMeasure, Window, compare_measures, expected_quantum_time,
                      minkowski_content, pushforward_measure)
from ._seeding import seed_for
from .zipper import (ZipperRun, markov_covariance_check, run_zipper, stationarity_diagnostic)

__all__ = [
    "AtomicMeasure", "ChainPullback", "CovarianceModel", "DrivingPath", "GmcSpec", "MapChain",
    "ProbeSet", "QuantumTimeMeasure", "ScalingMap", "SlezipError", "TraceSample", "Window",
    "ZipperRun", "compare_measures", "compute_trace", "expected_mass", "expected_quantum_time",
    "gmc_converged", "gmc_measure", "invariance_check", "joint_covariance", "kernel", "khat",
    "markov_covariance_check", "minkowski_content", "moment_estimate", "probe_covariance",
    "probe_means", "pushforward_measure", "recover_reference", "refine_trace", "run_zipper",
    "sample_probes", "sample_sle_driving", "seed_for", "stationarity_diagnostic",
    "unzip_map", "unzipped_trace", "zip_map",
]
