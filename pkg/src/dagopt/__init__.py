"""Continuous-optimisation structure learning of linear DAGs.

Least-squares score with a smooth acyclicity constraint, solved by an
augmented Lagrangian or a quadratic penalty outer loop.
"""

from .constraints import BIN, EXP, ConstraintKind, RegularityReport, h_grad, h_value, matrix_exp, regularity_probe
from .errors import ConfigError, InvalidInputError, NumericOverflowError
from .graphs import MetricsReport, count_simple_cycles, evaluate, is_dag, shd, sid, threshold, tpr
from .objective import Dataset, SplitMatrix, least_squares, least_squares_grad, merge, penalized_value_grad, split
from .optimizers import InnerProblem, InnerResult, Status, minimize_adam, minimize_lbfgs, minimize_momentum
from .simulate import BinaryDag, sample_er_dag, sample_linear_sem, sample_weights, simulate_dataset
from .solvers import SolveResult, SolverConfig, Termination, final_convergence_test, solve, solve_alm, solve_qpm

__version__ = "0.1.0"
