"""Adversarial representation learning with closed-form kernel ridge solvers.

Train a neural encoder against exact ridge-regression target and adversary
heads by backpropagating through their closed-form solutions, analyze the
optimal embedding dimensionality from label second moments, and benchmark
against stochastic gradient descent-ascent baselines with Pareto-front and
hypervolume scoring.
"""

from .datasets import Dataset, TabularSchema, gaussian_mixture, load_tabular
from .dimension import DimReport, optimal_dim
from .encoder import EncoderParams, MlpSpec
from .evaluation import (
    EvalConfig,
    FrontReport,
    HeadSpec,
    TradeoffPoint,
    evaluate_frozen,
    hypervolume,
    pareto_front,
)
from .kernels import CenteredGram, KernelSpec, center_gram, gram
from .ridge import ArlObjectiveValue, RidgeFit, arl_objective, arl_objective_grad, fit, objective_J
from .training import TrainConfig, TrainHistory, sweep, train

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "TabularSchema",
    "gaussian_mixture",
    "load_tabular",
    "DimReport",
    "optimal_dim",
    "EncoderParams",
    "MlpSpec",
    "EvalConfig",
    "FrontReport",
    "HeadSpec",
    "TradeoffPoint",
    "evaluate_frozen",
    "hypervolume",
    "pareto_front",
    "CenteredGram",
    "KernelSpec",
    "center_gram",
    "gram",
    "ArlObjectiveValue",
    "RidgeFit",
    "arl_objective",
    "arl_objective_grad",
    "fit",
    "objective_J",
    "TrainConfig",
    "TrainHistory",
    "sweep",
    "train",
    "__version__",
]
