"""Iterative random-forest imputation whose models can be reused on new data."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DataError,
    DegenerateInputError,
    MFPError,
    ModelFormatError,
    SchemaError,
)
from .forest import Forest, ForestParams, fit_forest  # noqa: E402
from .imputer import (  # noqa: E402
    ErrorTrace,
    ImputationModel,
    ImputerConfig,
    fit,
    load_model,
    save_model,
    transform,
)
from .tabular import Categorical, Continuous, Dataset, read_csv, write_csv  # noqa: E402

__all__ = [
    "__version__",
    "Categorical",
    "Continuous",
    "ConvergenceError",
    "DataError",
    "Dataset",
    "DegenerateInputError",
    "ErrorTrace",
    "Forest",
    "ForestParams",
    "ImputationModel",
    "ImputerConfig",
    "MFPError",
    "ModelFormatError",
    "SchemaError",
    "fit",
    "fit_forest",
    "load_model",
    "read_csv",
    "save_model",
    "transform",
    "write_csv",
]
