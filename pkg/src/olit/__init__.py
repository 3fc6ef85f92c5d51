"""Online learning improvement toolkit.

Predicts final course grades from partial activity logs and assignment
grades, and derives path-based intervention strategies from decision-tree
models.  Ships a synthetic cohort generator, a CLI and an HTTP service.
"""

from .balance import SmoteConfig, smote, stratified_split
from .bundle import ModelBundle, load_bundle, save_bundle
from .carttree import CartConfig, CartTree, best_split, fit_cart, gini, predict_leaf
from .cohortgen import GeneratorConfig, generate_cohort, summarize_manifest
from .experiment import accuracy, cohort_summary, precision_recall, run_weekly_windows
from .ingest import (
    ActivityCategory,
    CourseCalendar,
    FeatureMatrix,
    GradeClass,
    WindowSubset,
    assemble_features,
    bin_by_week,
    categorize_event,
    normalize_features,
    parse_grades_csv,
    parse_log_csv,
    select_window,
)
from .intervene import (
    InterventionPlan,
    PathRule,
    SupervisionReport,
    counterfactual_plan,
    extract_paths,
    render_strategy_text,
    supervision_report,
)
from .linmodel import SoftmaxModel, fit_logreg, predict_class, predict_proba
from .training import TrainSettings, train_bundle

__version__ = "0.1.0"

__all__ = [
    "ActivityCategory",
    "CartConfig",
    "CartTree",
    "CourseCalendar",
    "FeatureMatrix",
    "GeneratorConfig",
    "GradeClass",
    "InterventionPlan",
    "ModelBundle",
    "PathRule",
    "SmoteConfig",
    "SoftmaxModel",
    "SupervisionReport",
    "TrainSettings",
    "WindowSubset",
    "accuracy",
    "assemble_features",
    "best_split",
    "bin_by_week",
    "categorize_event",
    "cohort_summary",
    "counterfactual_plan",
    "extract_paths",
    "fit_cart",
    "fit_logreg",
    "generate_cohort",
    "gini",
    "load_bundle",
    "normalize_features",
    "parse_grades_csv",
    "parse_log_csv",
    "precision_recall",
    "predict_class",
    "predict_leaf",
    "predict_proba",
    "render_strategy_text",
    "run_weekly_windows",
    "save_bundle",
    "select_window",
    "smote",
    "stratified_split",
    "summarize_manifest",
    "supervision_report",
    "train_bundle",
]
