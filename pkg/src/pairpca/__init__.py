"""Weighted-pairs PCA: PCA, supervised and semi-supervised PCA, supervised TCA
and domain adaptation PCA (DAPCA) with memory-efficient Gram assembly."""

from .dapca import FitConfig, FitError, KnnAssignment, fit, knn_match, objective
from .dataset import Dataset, DataError, ToyConfig, center, generate_toy, load_csv, save_csv
from .eigen import (
    ComponentSelectionError,
    ProjectionModel,
    TruncationWarning,
    eig_sym,
    load_model,
    project,
    save_model,
    select_components,
)
from .gram import (
    GramMatrix,
    gram_cross_term,
    gram_oracle,
    gram_semi_supervised,
    gram_stca,
    gram_supervised,
)
from .validate import (
    ValidationReport,
    balanced_accuracy,
    benefit,
    direct_validate,
    knn_classify,
    mixing_score,
    reverse_validate,
)
from .weights import DeltaSpec, EffectiveBlockConstants, build_delta, row_sum_constants

__version__ = "0.1.0"
