"""Forward-gradient optimization lab.

Dual-number and tape-based automatic differentiation, tangent laws, forward
and true gradient oracles, first-order optimizers, a benchmark catalog,
checks of the estimator's theoretical properties and a benchmark harness.
"""
from .autodiff import ADDomainError, Program, grad_forward_full, grad_reverse, jvp
from .estimators import GradientOracle, GradientSample
from .optimizers import OptimizerConfig, OptimizerState, step
from .problems import Problem, ProblemSet, catalog, linear_objective, make_problem
from .rng import SeededRng
from .tangents import TangentSampler

__all__ = [
    "ADDomainError",
    "GradientOracle",
    "GradientSample",
    "OptimizerConfig",
    "OptimizerState",
    "Problem",
    "ProblemSet",
    "Program",
    "SeededRng",
    "TangentSampler",
    "catalog",
    "grad_forward_full",
    "grad_reverse",
    "jvp",
    "linear_objective",
    "make_problem",
    "step",
]

__version__ = "0.1.0"
