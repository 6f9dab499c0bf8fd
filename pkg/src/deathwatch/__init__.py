"""Character death-risk prediction from scene co-occurrence networks.

Pipeline: parse scene transcripts, aggregate scenes into a weighted social
graph, compute seven centrality features per character, train a calibrated
linear SVM on who already died, and rank the living by probability of
dying next.
"""

__version__ = "0.1.0"

from .centrality import FeatureMatrix, assemble_features, feature_table
from .evaluation import (
    CvConfig,
    PredictionReport,
    evaluate_outcomes,
    rank_living,
    repeated_cv,
)
from .graph import SocialGraph, build_graph, export_graph, filter_min_degree
from .svm import LabeledDataset, SvmModel, predict_proba, train_svm
from .transcripts import (
    AliasTable,
    SceneRecord,
    canonicalize,
    parse_transcript,
    to_scene_records,
)

__all__ = [
    "AliasTable",
    "CvConfig",
    "FeatureMatrix",
    "LabeledDataset",
    "PredictionReport",
    "SceneRecord",
    "SocialGraph",
    "SvmModel",
    "assemble_features",
    "build_graph",
    "canonicalize",
    "evaluate_outcomes",
    "export_graph",
    "feature_table",
    "filter_min_degree",
    "parse_transcript",
    "predict_proba",
    "rank_living",
    "repeated_cv",
    "to_scene_records",
    "train_svm",
]
