"""Robust feedforward-network regression lab for weakly dependent time series.

Simulates nonlinear autoregressive data with possibly heavy-tailed
innovations, trains networks by empirical risk minimization under
absolute, Huber or squared loss, evaluates excess risk and prediction
error across replications, and computes the closed-form theoretical
quantities (schedules, covering bounds, excess-risk bounds) attached to
the two dependence regimes.
"""

from .dgp import DgpSpec, Trajectory, dgp1_spec, dgp2_spec, embed, simulate
from .harness import ExperimentConfig, ReplicationRecord, run_experiment, summarize
from .losses import LossSpec
from .mlp import ClassSpec, NetworkArchitecture, NetworkParams
from .theory import TheoryInputs
from .trainer import TrainConfig, TrainReport, empirical_risk, fit

__version__ = "0.1.0"

__all__ = [
    "ClassSpec",
    "DgpSpec",
    "ExperimentConfig",
    "LossSpec",
    "NetworkArchitecture",
    "NetworkParams",
    "ReplicationRecord",
    "TheoryInputs",
    "TrainConfig",
    "TrainReport",
    "Trajectory",
    "dgp1_spec",
    "dgp2_spec",
    "embed",
    "empirical_risk",
    "fit",
    "run_experiment",
    "simulate",
    "summarize",
]
