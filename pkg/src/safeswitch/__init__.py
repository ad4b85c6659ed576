"""Safe sequential optimization of switching functions with Gaussian processes."""

from .config import ExperimentConfig
from .environment import DomainGrid, FunctionTable, SwitchingEnvironment
from .gp_core import ConfidenceBand, GpPosterior, KernelHyper, Observation
from .harness import run_episode, run_experiment, write_outputs
from .policies import POLICY_IDS, PolicyConfig, initialize_policy

__all__ = [
    "ConfidenceBand",
    "DomainGrid",
    "ExperimentConfig",
    "FunctionTable",
    "GpPosterior",
    "KernelHyper",
    "Observation",
    "POLICY_IDS",
    "PolicyConfig",
    "SwitchingEnvironment",
    "initialize_policy",
    "run_episode",
    "run_experiment",
    "write_outputs",
]
