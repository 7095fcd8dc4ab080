"""Drift explanation toolkit: track how group counterfactuals move between data windows."""

from .analysis import (
    GroupChange,
    Headline,
    MatchResult,
    ReportParams,
    build_report,
    cfav_cosine,
    classify_headline,
    global_disagreement,
    group_changes,
    load_report,
    local_disagreement,
    match_groups,
    per_class_means,
    save_report,
)
from .classifier import Classifier, TrainConfig, load_model, train
from .counterfactual import (
    CEResult,
    FaceGraph,
    batch_counterfactuals,
    build_face_graph,
    face_ce,
    scott_bandwidth,
    wachter_ce,
)
from .errors import (
    InvalidArgumentError,
    NoCounterfactualError,
    OptimizationFailureError,
    ProvenanceError,
)
from .grouping import (
    GceModel,
    GroupExplanation,
    assign_cfav,
    bic_score,
    combined_distance,
    estimate_k,
    explain_window,
    glance,
    load_gce,
    save_gce,
)
from .render import render_report
from .scenario import (
    DriftSpec,
    SampleWindow,
    SubConcept,
    apply_drift,
    build_case,
    read_scenario_file,
    read_window_csv,
    sample_window,
    validate_scenario,
    write_scenario_file,
    write_window_csv,
)

__version__ = "0.1.0"

__all__ = [
    "CEResult",
    "Classifier",
    "DriftSpec",
    "FaceGraph",
    "GceModel",
    "GroupChange",
    "GroupExplanation",
    "Headline",
    "InvalidArgumentError",
    "MatchResult",
    "NoCounterfactualError",
    "OptimizationFailureError",
    "ProvenanceError",
    "ReportParams",
    "SampleWindow",
    "SubConcept",
    "TrainConfig",
    "apply_drift",
    "assign_cfav",
    "batch_counterfactuals",
    "bic_score",
    "build_case",
    "build_face_graph",
    "build_report",
    "cfav_cosine",
    "classify_headline",
    "combined_distance",
    "estimate_k",
    "explain_window",
    "face_ce",
    "glance",
    "global_disagreement",
    "group_changes",
    "load_gce",
    "load_model",
    "load_report",
    "local_disagreement",
    "match_groups",
    "per_class_means",
    "read_scenario_file",
    "read_window_csv",
    "render_report",
    "sample_window",
    "save_gce",
    "save_report",
    "scott_bandwidth",
    "train",
    "validate_scenario",
    "wachter_ce",
    "write_scenario_file",
    "write_window_csv",
    "__version__",
]
