"""Isolated-gesture recognition from skeletal motion capture.

Variable-length pose sequences are down-sampled to a fixed number of poses
evenly spread along the time axis, compared with elastic kernels (dynamic
time warping and a regularized, summation-based variant), and classified by a
one-vs-one SVM trained on precomputed kernel matrices.
"""

from .data import (
    Dataset,
    PoseSequence,
    load_dataset,
    parse_generic,
    parse_msr_skeleton,
    root_relativize,
    save_dataset,
    serialize_generic,
)
from .gram import GramMatrix, gram_cross, gram_train, load_gram, raw_pairwise, save_gram
from .harness import (
    EvalReport,
    SplitPlan,
    benchmark_latency,
    classify_sequence,
    fixed_split,
    grid_search,
    kfold,
    run_experiment,
    subject_splits,
)
from .kernels import (
    KernelSpec,
    d_dtw,
    d_euclid_sq,
    fit_normalization,
    kdtw_raw,
    kernel_eval,
)
from .resample import FixedSequence, resample_uniform
from .svm import (
    BinaryModel,
    SvmModel,
    load_model,
    predict,
    save_model,
    train_binary,
    train_multiclass,
)
from .synth import make_gesture_dataset

__version__ = "0.1.0"

__all__ = [
    "BinaryModel",
    "Dataset",
    "EvalReport",
    "FixedSequence",
    "GramMatrix",
    "KernelSpec",
    "PoseSequence",
    "SplitPlan",
    "SvmModel",
    "benchmark_latency",
    "classify_sequence",
    "d_dtw",
    "d_euclid_sq",
    "fit_normalization",
    "fixed_split",
    "gram_cross",
    "gram_train",
    "grid_search",
    "kdtw_raw",
    "kernel_eval",
    "kfold",
    "load_dataset",
    "load_gram",
    "load_model",
    "make_gesture_dataset",
    "parse_generic",
    "parse_msr_skeleton",
    "predict",
    "raw_pairwise",
    "resample_uniform",
    "root_relativize",
    "run_experiment",
    "save_dataset",
    "save_gram",
    "save_model",
    "serialize_generic",
    "subject_splits",
    "train_binary",
    "train_multiclass",
]
