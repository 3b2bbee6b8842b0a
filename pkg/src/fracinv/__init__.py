"""Subdiffusion forward solvers and boundary-data inversion in one space dimension."""
from .backend import BACKEND
from .errors import DomainError, NumericalError, ParameterError
from .mlf import MlfParams, eval_mlf, kernel_e, mittag_leffler, step_response
from .problem import Excitation, FieldHistory, ProblemSetup, SpaceGrid, TimeGrid, Trace

__version__ = "0.1.0"
