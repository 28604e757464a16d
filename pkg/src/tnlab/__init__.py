"""Numerical checks for T_N configurations in the entropy set K_a of the p-system."""

__version__ = "0.1.0"

from .errors import (ConsistencyError, InvalidInputError, ModelEvaluationError, RankDeficiencyError,
                     SingularityError, TnlabError, UnsupportedSizeError, WrongRegimeError, WrongRouteError)
from .models import AppendixModel, ExpModel, ScalarModel, TableModel, make_model

__all__ = [
    "AppendixModel", "ConsistencyError", "ExpModel", "InvalidInputError", "ModelEvaluationError",
    "RankDeficiencyError", "ScalarModel", "SingularityError", "TableModel", "TnlabError",
    "UnsupportedSizeError", "WrongRegimeError", "WrongRouteError", "make_model",
]
