"""Year-adjusted analysis of long-term trials whose treatments change over time."""

__version__ = "0.1.0"

from .dataset import Dataset, Factor, builtin_toy, derive_factor, incidence, load_table
from .design import DesignMatrices, build_design, connectivity
from .errors import (
    ConvergenceError,
    DataError,
    DesignError,
    EstimabilityError,
    FormulaError,
    TurnoverError,
)
from .formula import ModelSpec, Term, parse_formula, render_formula
from .inference import (
    MeansTable,
    SedMatrix,
    adjusted_means,
    back_transform,
    direct_difference,
    indirect_difference,
    mean_sed,
    predicted_cells,
    range_means,
    sed_matrix,
    select_year_status,
    transform_response,
)
from .letters import LetterDisplay, SignificanceMatrix, letter_display, stratified_display, verify_display
from .simulator import SimConfig, bias_study, simulate_trial
from .solver import FittedModel, VarianceComponents, fit, fit_ols, fit_reml, loglik_reml

__all__ = [
    "ConvergenceError", "DataError", "Dataset", "DesignError", "DesignMatrices",
    "EstimabilityError", "Factor", "FittedModel", "FormulaError", "LetterDisplay",
    "MeansTable", "ModelSpec", "SedMatrix", "SignificanceMatrix", "SimConfig", "Term",
    "TurnoverError", "VarianceComponents", "adjusted_means", "back_transform",
    "bias_study", "build_design", "builtin_toy", "connectivity", "derive_factor",
    "direct_difference", "fit", "fit_ols", "fit_reml", "incidence", "indirect_difference",
    "letter_display", "load_table", "loglik_reml", "mean_sed", "parse_formula",
    "predicted_cells", "range_means", "render_formula", "sed_matrix", "select_year_status",
    "simulate_trial", "stratified_display", "transform_response", "verify_display",
]
