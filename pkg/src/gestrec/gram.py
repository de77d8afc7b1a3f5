"""Batch kernel-matrix computation with symmetry exploitation and caching.

Training Gram matrices are computed over the upper triangle only and
mirrored, so they are exactly symmetric. Raw measure matrices depend only on
(family, nu, corridor, pose count) — never on sigma or the fitted
normalization — and are therefore cacheable once per dataset and sliced per
split; alpha/beta are always refitted from the training block alone.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import _dp
from .errors import DimensionError, MalformedFile, ParamError, StateError
from .kernels import KernelSpec, family_code, fit_normalization, wrap_values
from .resample import FixedSequence


@dataclass
class GramMatrix:
    """Kernel evaluations over row x column sequence sets, with provenance."""

    values: np.ndarray
    row_ids: list[str]
    col_ids: list[str]
    spec: KernelSpec
    symmetric: bool

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionError(f"gram values must be 2-D, got shape {values.shape}")
        if values.shape != (len(self.row_ids), len(self.col_ids)):
            raise DimensionError(
                f"gram shape {values.shape} does not match id lists "
                f"({len(self.row_ids)}, {len(self.col_ids)})"
            )
        if not np.isfinite(values).all():
            raise DimensionError("gram contains non-finite entries")
        self.values = values


def set_workers(workers: int | None) -> None:
    """Pin the thread count used by the batch pair loops (None: leave as-is)."""
    if workers is None:
        return
    import numba

    if workers < 1:
        raise ParamError(f"workers must be >= 1, got {workers}")
    numba.set_num_threads(min(int(workers), numba.config.NUMBA_NUM_THREADS))


def stack_sequences(sequences: list[FixedSequence]) -> tuple[np.ndarray, list[str]]:
    """Stack homogeneous fixed sequences into one (n, L, k) array."""
    if not sequences:
        raise ParamError("sequence list is empty")
    shapes = {s.poses.shape for s in sequences}
    if len(shapes) > 1:
        raise DimensionError(f"sequences disagree on (L, k): {sorted(shapes)}")
    x = np.ascontiguousarray(np.stack([s.poses for s in sequences]))
    return x, [s.seq_id for s in sequences]


def _corridor_code(spec: KernelSpec) -> int:
    return -1 if spec.corridor is None else int(spec.corridor)


def raw_pairwise(
    sequences: list[FixedSequence],
    spec: KernelSpec,
    workers: int | None = None,
) -> np.ndarray:
    """Symmetric matrix of the family's raw measure over all pairs (incl. diagonal)."""
    x, _ = stack_sequences(sequences)
    n = x.shape[0]
    set_workers(workers)
    ii, jj = np.triu_indices(n)
    flat = _dp.pairwise_values(
        x, ii.astype(np.int64), jj.astype(np.int64),
        family_code(spec.family), float(spec.nu), _corridor_code(spec),
    )
    out = np.empty((n, n))
    out[ii, jj] = flat
    out[jj, ii] = flat
    return out


def raw_cross(
    test: list[FixedSequence],
    train: list[FixedSequence],
    spec: KernelSpec,
    workers: int | None = None,
) -> np.ndarray:
    """Rectangular |test| x |train| raw measure matrix."""
    xt, _ = stack_sequences(test)
    xr, _ = stack_sequences(train)
    if xt.shape[1:] != xr.shape[1:]:
        raise DimensionError(
            f"test sequences {xt.shape[1:]} incompatible with train {xr.shape[1:]}"
        )
    set_workers(workers)
    return _dp.cross_values(
        xt, xr, family_code(spec.family), float(spec.nu), _corridor_code(spec)
    )


def fit_spec_on_raw(spec: KernelSpec, raw_symmetric: np.ndarray) -> KernelSpec:
    """Fit rdtw normalization over the training pairs (upper triangle incl. diagonal)."""
    if spec.family != "rdtw":
        return spec
    iu = np.triu_indices(raw_symmetric.shape[0])
    alpha, beta = fit_normalization(raw_symmetric[iu])
    return spec.with_normalization(alpha, beta)


def gram_train(
    train: list[FixedSequence],
    spec: KernelSpec,
    workers: int | None = None,
    raw: np.ndarray | None = None,
) -> tuple[GramMatrix, KernelSpec]:
    """Symmetric training kernel matrix plus the (possibly) fitted spec.

    For rdtw the raw measure is computed for every i <= j pair, the
    normalization is fitted over exactly those values, and only then is the
    exponential wrapper applied. ``raw`` may supply a precomputed raw matrix
    for the same sequences (e.g. a cached full-dataset slice).
    """
    _, ids = stack_sequences(train)
    if raw is None:
        raw = raw_pairwise(train, spec, workers=workers)
    elif raw.shape != (len(train), len(train)):
        raise DimensionError(f"raw matrix shape {raw.shape} != ({len(train)}, {len(train)})")
    fitted = fit_spec_on_raw(spec, raw)
    values = wrap_values(fitted, raw)
    return (
        GramMatrix(values=values, row_ids=ids, col_ids=list(ids), spec=fitted, symmetric=True),
        fitted,
    )


def gram_cross(
    test: list[FixedSequence],
    train: list[FixedSequence],
    spec: KernelSpec,
    workers: int | None = None,
    raw: np.ndarray | None = None,
) -> GramMatrix:
    """Rectangular |test| x |train| kernel matrix using training-fitted constants.

    The spec must already be fitted for rdtw; test-pair values never influence
    alpha/beta, and raw values beyond the training range are wrapped without
    clipping.
    """
    if spec.family == "rdtw" and not spec.fitted:
        raise StateError("rdtw spec is unfitted: call gram_train first")
    _, test_ids = stack_sequences(test)
    _, train_ids = stack_sequences(train)
    if raw is None:
        raw = raw_cross(test, train, spec, workers=workers)
    elif raw.shape != (len(test), len(train)):
        raise DimensionError(f"raw matrix shape {raw.shape} != ({len(test)}, {len(train)})")
    return GramMatrix(
        values=wrap_values(spec, raw),
        row_ids=test_ids,
        col_ids=train_ids,
        spec=spec,
        symmetric=False,
    )


# ---------------------------------------------------------------------------
# Disk cache


def sequences_key(sequences: list[FixedSequence]) -> str:
    """Content hash of a fixed-sequence list (ids, labels and pose bytes)."""
    h = hashlib.sha256()
    for s in sequences:
        h.update(s.seq_id.encode())
        h.update(s.label.encode())
        h.update(s.subject.encode())
        h.update(str(s.poses.shape).encode())
        h.update(s.poses.tobytes())
    return h.hexdigest()


def raw_cache_name(sequences: list[FixedSequence], spec: KernelSpec) -> str:
    ident = {
        "family": spec.family,
        "nu": spec.nu if spec.family == "rdtw" else None,
        "corridor": spec.corridor if spec.family == "rdtw" else None,
        "data": sequences_key(sequences),
    }
    digest = hashlib.sha256(json.dumps(ident, sort_keys=True).encode()).hexdigest()
    return f"raw-{spec.family}-{digest[:24]}.npz"


def raw_pairwise_cached(
    sequences: list[FixedSequence],
    spec: KernelSpec,
    cache_dir=None,
    workers: int | None = None,
) -> np.ndarray:
    """raw_pairwise with an optional on-disk cache keyed by data and spec identity."""
    if cache_dir is None:
        return raw_pairwise(sequences, spec, workers=workers)
    from pathlib import Path

    path = Path(cache_dir) / raw_cache_name(sequences, spec)
    if path.exists():
        with np.load(path) as archive:
            values = archive["values"]
        if values.shape == (len(sequences), len(sequences)):
            return values
    values = raw_pairwise(sequences, spec, workers=workers)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, values=values)
    return values


def save_gram(path, gram: GramMatrix) -> None:
    """Persist a Gram matrix with its spec, id lists and a content checksum."""
    checksum = hashlib.sha256(np.ascontiguousarray(gram.values).tobytes()).hexdigest()
    header = {
        "spec": gram.spec.to_dict(),
        "row_ids": gram.row_ids,
        "col_ids": gram.col_ids,
        "symmetric": gram.symmetric,
        "checksum": checksum,
    }
    np.savez_compressed(
        path, values=gram.values, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    )


def load_gram(path) -> GramMatrix:
    with np.load(path) as archive:
        values = archive["values"]
        header = json.loads(archive["header"].tobytes().decode())
    checksum = hashlib.sha256(np.ascontiguousarray(values).tobytes()).hexdigest()
    if checksum != header["checksum"]:
        raise MalformedFile(f"gram file {path} failed its checksum")
    return GramMatrix(
        values=values,
        row_ids=list(header["row_ids"]),
        col_ids=list(header["col_ids"]),
        spec=KernelSpec.from_dict(header["spec"]),
        symmetric=bool(header["symmetric"]),
    )
