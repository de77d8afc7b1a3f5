"""Evaluation protocol: subject-wise splits, k-fold CV, sweeps, grids, latency.

The expensive object in every protocol is the matrix of raw elastic measures
over the whole dataset. It is split-independent, so it is computed (or loaded
from cache) once and sliced per split; only the cheap steps — normalization
fit, exponential wrap, SVM training — are repeated per split, with the fit
restricted to training pairs.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np

from .data import Dataset
from .errors import ParamError
from .gram import gram_cross, gram_train, raw_pairwise_cached
from .kernels import KernelSpec
from .resample import FixedSequence, resample_dataset, resample_uniform
from .svm import SvmModel, predict, train_multiclass


@dataclass(frozen=True)
class SplitPlan:
    """Index lists of one train/test split; subject sets when subject-driven."""

    name: str
    train_idx: tuple[int, ...]
    test_idx: tuple[int, ...]
    train_subjects: tuple[str, ...] | None = None
    test_subjects: tuple[str, ...] | None = None


@dataclass
class SplitResult:
    name: str
    n_train: int
    n_test: int
    train_accuracy: float
    test_accuracy: float
    confusion: list[list[int]]
    train_subjects: tuple[str, ...] | None = None
    test_subjects: tuple[str, ...] | None = None


@dataclass
class EvalReport:
    """Per-split accuracies plus aggregates for one configuration."""

    config: dict
    class_set: list[str]
    splits: list[SplitResult]
    mean_train: float
    std_train: float
    mean_test: float
    std_test: float
    timings: dict = field(default_factory=dict)


def subject_splits(dataset: Dataset, n_train: int) -> list[SplitPlan]:
    """All C(|subjects|, n_train) subject-disjoint splits, lexicographic order."""
    subjects = list(dataset.subject_set)
    if not 1 <= n_train < len(subjects):
        raise ParamError(
            f"n_train must be in [1, {len(subjects) - 1}], got {n_train}"
        )
    by_subject: dict[str, list[int]] = {s: [] for s in subjects}
    for i, seq in enumerate(dataset.sequences):
        by_subject[seq.subject].append(i)
    plans = []
    for train_subjects in combinations(subjects, n_train):
        train_set = set(train_subjects)
        test_subjects = tuple(s for s in subjects if s not in train_set)
        train_idx = tuple(i for s in train_subjects for i in by_subject[s])
        test_idx = tuple(i for s in test_subjects for i in by_subject[s])
        plans.append(
            SplitPlan(
                name="train:" + "+".join(train_subjects),
                train_idx=train_idx,
                test_idx=test_idx,
                train_subjects=tuple(train_subjects),
                test_subjects=test_subjects,
            )
        )
    return plans


def fixed_split(dataset: Dataset, train_subjects, test_subjects) -> list[SplitPlan]:
    """Single named split from explicit subject lists (e.g. 3 train / 2 test)."""
    train_subjects = tuple(train_subjects)
    test_subjects = tuple(test_subjects)
    known = set(dataset.subject_set)
    unknown = (set(train_subjects) | set(test_subjects)) - known
    if unknown:
        raise ParamError(f"unknown subjects: {sorted(unknown)}")
    if set(train_subjects) & set(test_subjects):
        raise ParamError("train and test subjects overlap")
    if not train_subjects or not test_subjects:
        raise ParamError("both subject lists must be non-empty")
    train_idx = tuple(
        i for i, s in enumerate(dataset.sequences) if s.subject in set(train_subjects)
    )
    test_idx = tuple(
        i for i, s in enumerate(dataset.sequences) if s.subject in set(test_subjects)
    )
    return [
        SplitPlan(
            name="fixed:" + "+".join(train_subjects),
            train_idx=train_idx,
            test_idx=test_idx,
            train_subjects=train_subjects,
            test_subjects=test_subjects,
        )
    ]


def kfold(dataset: Dataset, k: int, seed: int = 0) -> list[SplitPlan]:
    """Stratified-by-class k folds with seeded shuffling; fold sizes differ <= 1."""
    n = dataset.n
    if k < 2:
        raise ParamError(f"k must be >= 2, got {k}")
    if k > n:
        raise ParamError(f"k={k} exceeds dataset size {n}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    counter = 0
    for label in dataset.class_set:
        idx = np.asarray(
            [i for i, s in enumerate(dataset.sequences) if s.label == label]
        )
        idx = idx[rng.permutation(idx.size)]
        for i in idx:
            fold_of[i] = counter % k
            counter += 1
    plans = []
    for f in range(k):
        test_idx = tuple(int(i) for i in np.flatnonzero(fold_of == f))
        train_idx = tuple(int(i) for i in np.flatnonzero(fold_of != f))
        plans.append(SplitPlan(name=f"fold{f}", train_idx=train_idx, test_idx=test_idx))
    return plans


def _accuracy(truth: list[str], preds: list[str]) -> float:
    hits = sum(1 for t, p in zip(truth, preds) if t == p)
    return 100.0 * hits / len(truth)


def _confusion(class_set, truth, preds) -> list[list[int]]:
    index = {c: i for i, c in enumerate(class_set)}
    mat = [[0] * len(class_set) for _ in class_set]
    for t, p in zip(truth, preds):
        mat[index[t]][index[p]] += 1
    return mat


def run_experiment(
    dataset: Dataset,
    plans: list[SplitPlan],
    poses: int,
    spec: KernelSpec,
    C: float = 10.0,
    workers: int | None = None,
    cache_dir=None,
    tol: float = 1e-3,
    max_iter: int | None = None,
    raw_full: np.ndarray | None = None,
) -> EvalReport:
    """Resample, train and score every split plan; aggregate mean/std accuracy."""
    if not plans:
        raise ParamError("no split plans given")
    t0 = time.perf_counter()
    fixed = resample_dataset(dataset.sequences, poses)
    labels = [s.label for s in dataset.sequences]
    if raw_full is None:
        raw_full = raw_pairwise_cached(fixed, spec, cache_dir=cache_dir, workers=workers)
    t_raw = time.perf_counter() - t0

    results = []
    t1 = time.perf_counter()
    for plan in plans:
        tr = list(plan.train_idx)
        te = list(plan.test_idx)
        train_seqs = [fixed[i] for i in tr]
        train_labels = [labels[i] for i in tr]
        gtrain, fitted = gram_train(
            train_seqs, spec, raw=raw_full[np.ix_(tr, tr)]
        )
        model = train_multiclass(
            gtrain, train_labels, C, tol=tol, max_iter=max_iter, poses=poses
        )
        train_preds = predict(model, gtrain)
        test_seqs = [fixed[i] for i in te]
        test_labels = [labels[i] for i in te]
        gcross = gram_cross(
            test_seqs, train_seqs, fitted, raw=raw_full[np.ix_(te, tr)]
        )
        test_preds = predict(model, gcross)
        results.append(
            SplitResult(
                name=plan.name,
                n_train=len(tr),
                n_test=len(te),
                train_accuracy=_accuracy(train_labels, train_preds),
                test_accuracy=_accuracy(test_labels, test_preds),
                confusion=_confusion(dataset.class_set, test_labels, test_preds),
                train_subjects=plan.train_subjects,
                test_subjects=plan.test_subjects,
            )
        )
    t_splits = time.perf_counter() - t1

    train_acc = np.asarray([r.train_accuracy for r in results])
    test_acc = np.asarray([r.test_accuracy for r in results])
    return EvalReport(
        config={
            "poses": poses,
            "family": spec.family,
            "nu": spec.nu,
            "sigma": spec.sigma,
            "C": C,
            "corridor": spec.corridor,
            "n_splits": len(plans),
        },
        class_set=list(dataset.class_set),
        splits=results,
        mean_train=float(train_acc.mean()),
        std_train=float(train_acc.std()),
        mean_test=float(test_acc.mean()),
        std_test=float(test_acc.std()),
        timings={"raw_matrix_s": t_raw, "splits_s": t_splits},
    )


def default_grids(
    dataset: Dataset, family: str, poses: int, workers: int | None = None
) -> dict:
    """Wide default grids; sigma is scaled by a median raw-measure statistic."""
    base = {"nu": [0.01, 0.1, 1.0, 10.0], "sigma_mult": [0.1, 1.0, 10.0, 100.0], "C": [0.1, 1.0, 10.0, 100.0]}
    if family == "rdtw":
        # normalized rdtw values live in [1, e] by construction
        scale = 1.0
    else:
        fixed = resample_dataset(dataset.sequences, poses)
        from .gram import raw_pairwise

        raw = raw_pairwise(fixed, KernelSpec(family=family), workers=workers)
        iu = np.triu_indices(raw.shape[0], k=1)
        scale = float(np.median(raw[iu])) or 1.0
    return {
        "nu": base["nu"] if family == "rdtw" else [1.0],
        "sigma": [m * scale for m in base["sigma_mult"]],
        "C": base["C"],
        "poses": [poses],
    }


def grid_search(
    dataset: Dataset,
    plans: list[SplitPlan],
    family: str,
    grids: dict,
    corridor: int | None = None,
    workers: int | None = None,
    cache_dir=None,
    tol: float = 1e-3,
    max_iter: int | None = None,
) -> tuple[dict, list[dict]]:
    """Evaluate every (nu, sigma, C, poses) config; return (best, all rows).

    Configs are deduplicated and visited in ascending (nu, sigma, C, poses)
    order; ties on mean test accuracy keep the smallest config.
    """
    configs = sorted(
        {
            (float(nu), float(sg), float(c), int(l))
            for nu, sg, c, l in product(
                grids["nu"], grids["sigma"], grids["C"], grids["poses"]
            )
        }
    )
    if not configs:
        raise ParamError("empty hyperparameter grid")
    raw_memo: dict[tuple, np.ndarray] = {}
    rows = []
    best_row = None
    for nu, sigma, c, poses in configs:
        spec = KernelSpec(family=family, nu=nu, sigma=sigma, corridor=corridor)
        raw_key = (poses, nu if family == "rdtw" else None)
        if raw_key not in raw_memo:
            fixed = resample_dataset(dataset.sequences, poses)
            raw_memo[raw_key] = raw_pairwise_cached(
                fixed, spec, cache_dir=cache_dir, workers=workers
            )
        report = run_experiment(
            dataset,
            plans,
            poses,
            spec,
            C=c,
            workers=workers,
            tol=tol,
            max_iter=max_iter,
            raw_full=raw_memo[raw_key],
        )
        row = {
            "family": family,
            "poses": poses,
            "nu": nu,
            "sigma": sigma,
            "C": c,
            "corridor": corridor,
            "mean_train_accuracy": report.mean_train,
            "mean_test_accuracy": report.mean_test,
            "std_test_accuracy": report.std_test,
        }
        rows.append(row)
        if best_row is None or row["mean_test_accuracy"] > best_row["mean_test_accuracy"]:
            best_row = row
    return dict(best_row), rows


def train_full(
    dataset: Dataset,
    spec: KernelSpec,
    poses: int,
    C: float,
    workers: int | None = None,
    cache_dir=None,
    tol: float = 1e-3,
    max_iter: int | None = None,
) -> tuple[SvmModel, list[FixedSequence], float]:
    """Train one model on the whole dataset; returns (model, fixed seqs, train acc)."""
    fixed = resample_dataset(dataset.sequences, poses)
    labels = [s.label for s in dataset.sequences]
    raw = raw_pairwise_cached(fixed, spec, cache_dir=cache_dir, workers=workers)
    gtrain, fitted = gram_train(fixed, spec, raw=raw)
    model = train_multiclass(gtrain, labels, C, tol=tol, max_iter=max_iter, poses=poses)
    train_acc = _accuracy(labels, predict(model, gtrain))
    return model, fixed, train_acc


def classify_sequence(model: SvmModel, train_fixed: list[FixedSequence], seq, workers: int | None = None) -> str:
    """Label one raw pose sequence: resample, one cross-gram row, vote."""
    fs = resample_uniform(seq, model.poses)
    g = gram_cross([fs], train_fixed, model.spec, workers=workers)
    return predict(model, g)[0]


def benchmark_latency(
    entries,
    samples,
    repeats: int = 30,
    warmup: int = 3,
    workers: int | None = None,
) -> list[dict]:
    """Single-action classification timing per prepared (family, L) model.

    ``entries`` is a list of (model, train_fixed) pairs; each sample
    classification is timed individually on a monotonic clock after discarded
    warm-up rounds; medians and p95 are reported in milliseconds.
    """
    if not samples:
        raise ParamError("no sample sequences to time")
    rows = []
    for model, train_fixed in entries:
        for w in range(warmup):
            classify_sequence(model, train_fixed, samples[w % len(samples)], workers=workers)
        times_ms = []
        for r in range(repeats):
            seq = samples[r % len(samples)]
            t0 = time.perf_counter()
            classify_sequence(model, train_fixed, seq, workers=workers)
            times_ms.append((time.perf_counter() - t0) * 1000.0)
        rows.append(
            {
                "family": model.spec.family,
                "poses": model.poses,
                "n_train": len(train_fixed),
                "median_ms": float(np.median(times_ms)),
                "p95_ms": float(np.percentile(times_ms, 95.0)),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Report serialization (CSV rows deterministic; timings live in the JSON only)

SPLIT_CSV_COLUMNS = [
    "config_index",
    "split_index",
    "split_name",
    "family",
    "poses",
    "nu",
    "sigma",
    "C",
    "corridor",
    "seed",
    "n_train",
    "n_test",
    "train_accuracy",
    "test_accuracy",
    "train_subjects",
    "test_subjects",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_split_csv(path, reports: list[EvalReport], seed: int | None = None) -> None:
    """One row per split per configuration; byte-stable for fixed inputs."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SPLIT_CSV_COLUMNS)
        for ci, report in enumerate(reports):
            cfg = report.config
            for si, split in enumerate(report.splits):
                writer.writerow(
                    [
                        ci,
                        si,
                        split.name,
                        cfg["family"],
                        cfg["poses"],
                        _fmt(float(cfg["nu"])),
                        _fmt(float(cfg["sigma"])),
                        _fmt(float(cfg["C"])),
                        _fmt(cfg["corridor"]),
                        _fmt(seed),
                        split.n_train,
                        split.n_test,
                        _fmt(split.train_accuracy),
                        _fmt(split.test_accuracy),
                        "+".join(split.train_subjects or ()),
                        "+".join(split.test_subjects or ()),
                    ]
                )


def write_summary_json(path, reports: list[EvalReport], seed: int | None = None) -> None:
    payload = {
        "seed": seed,
        "reports": [
            {
                "config": r.config,
                "class_set": r.class_set,
                "mean_train_accuracy": r.mean_train,
                "std_train_accuracy": r.std_train,
                "mean_test_accuracy": r.mean_test,
                "std_test_accuracy": r.std_test,
                "splits": [
                    {
                        "name": s.name,
                        "n_train": s.n_train,
                        "n_test": s.n_test,
                        "train_accuracy": s.train_accuracy,
                        "test_accuracy": s.test_accuracy,
                        "confusion": s.confusion,
                    }
                    for s in r.splits
                ],
                "timings": r.timings,
            }
            for r in reports
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


def write_curve_csv(path, rows: list[dict]) -> None:
    """Accuracy / latency curve rows (poses, family, ...) for plotting tools."""
    if not rows:
        raise ParamError("no curve rows to write")
    columns = list(rows[0].keys())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
