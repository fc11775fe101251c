"""Soft-failure detection for robot simulation runs.

Estimates a scalar acoustic-noise signal from logged joint velocities,
extracts spectro-temporal features, and classifies fixed-length noise frames
with a one-vs-rest kernel SVM trained from scratch.
"""

from .dataset import (
    AnnotatedBlock,
    Dataset,
    DatasetRole,
    FailureLabel,
    load_dataset,
    read_annotations,
    read_noise_file,
    write_annotations,
    write_noise_file,
)
from .errors import ValidationError
from .evaluation import (
    EvaluationReport,
    GridSearchResult,
    HyperGrid,
    default_grid,
    evaluate,
    grid_search,
    train_from_datasets,
)
from .noise import ColumnSpec, JointTrajectory, NoiseTrace, estimate_noise, read_trajectory
from .preprocess import (
    PreprocessConfig,
    class_counts,
    featurize_dataset,
    frame_features,
    pad_reflect,
)
from .svm import (
    BinarySvm,
    Kernel,
    MultiClassSvm,
    decision_value,
    load_model,
    predict,
    predict_many,
    save_model,
    train_binary,
    train_multiclass,
)
from .synth import ScenarioSpec, generate, parse_scenario_config

__version__ = "0.1.0"
