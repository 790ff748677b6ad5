"""Simulated locally private k-means: a one-round grid protocol and a
four-round LSH protocol, with per-agent privacy accounting."""

from .alg_low_error import low_error_kmeans
from .alg_one_round import one_round_kmeans
from .core import CenterSet, CostReport, Dataset, clustering_cost
from .data import gen_gaussian_mixture
from .experiment import ExperimentConfig, run_experiment
from .privacy import PrivacyBudget

__all__ = ["CenterSet", "CostReport", "Dataset", "PrivacyBudget", "clustering_cost",
           "ExperimentConfig", "gen_gaussian_mixture", "run_experiment",
           "low_error_kmeans", "one_round_kmeans"]
__version__ = "0.1.0"
