"""Multiclass C-SVM on precomputed kernel matrices.

The binary solver is an SMO ascent on the dual

    max  sum(alpha) - 1/2 alpha' Q alpha,   Q_ij = y_i y_j K_ij,
    s.t. 0 <= alpha_i <= C,  sum(alpha_i y_i) = 0,

with first-order maximal-violating-pair working-set selection. Negative
curvature along a selected pair (possible with the indefinite dtw kernel) is
handled by clipping the step to the box boundary in the ascent direction, so
iterations stay well defined; the ``converged`` flag reports whether the KKT
gap closed. Multiclass uses one binary model per unordered class pair with
majority voting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import AlignmentError, LabelError, NumericError, ParamError
from .gram import GramMatrix
from .kernels import KernelSpec

#: Curvature floor: a non-positive pair curvature is replaced by this, which
#: turns the analytic step into a move to the box boundary.
_TAU = 1e-12


@dataclass
class BinaryModel:
    """Dual solution of one binary subproblem.

    ``dual_coefs`` holds alpha_i * y_i for the support vectors;
    ``support_indices`` point into the training set the multiclass model was
    built on. The positive class is ``class_pair[0]``.
    """

    class_pair: tuple[str, str]
    support_indices: list[int]
    dual_coefs: list[float]
    bias: float
    C: float
    converged: bool
    n_iter: int = 0


@dataclass
class SvmModel:
    """One-vs-one multiclass model over a precomputed-kernel training set."""

    binaries: list[BinaryModel]
    class_set: list[str]
    spec: KernelSpec
    train_ids: list[str]
    poses: int | None = None


def dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Value of the dual objective sum(alpha) - 1/2 alpha' Q alpha."""
    ya = alpha * y
    return float(alpha.sum() - 0.5 * ya @ K @ ya)


def smo_solve(
    K: np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float = 1e-3,
    max_iter: int | None = None,
    record_objective: bool = False,
):
    """Solve the binary dual; returns (alpha, bias, converged, n_iter, history).

    ``y`` must be +/-1. Terminates when the maximal KKT violation drops to
    ``tol`` or after ``max_iter`` pair updates (default 10000 * n).
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if K.shape != (n, n):
        raise ParamError(f"kernel matrix shape {K.shape} does not match {n} labels")
    if not np.isfinite(K).all():
        raise NumericError("kernel matrix contains non-finite entries")
    if not np.all(np.abs(y) == 1.0):
        raise LabelError("binary labels must be +/-1")
    if not (y > 0).any() or not (y < 0).any():
        raise LabelError("need at least one example of each class")
    if not C > 0:
        raise ParamError(f"C must be > 0, got {C}")
    if max_iter is None:
        max_iter = 10_000 * n

    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a)
    pos = y > 0
    history: list[float] = []
    converged = False
    it = 0
    while it < max_iter:
        neg_yG = -y * G
        up = (pos & (alpha < C)) | (~pos & (alpha > 0.0))
        low = (pos & (alpha > 0.0)) | (~pos & (alpha < C))
        up_vals = np.where(up, neg_yG, -np.inf)
        low_vals = np.where(low, neg_yG, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        if up_vals[i] - low_vals[j] <= tol:
            converged = True
            break

        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = old_i - old_j
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            s = old_i + old_j
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = s
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = s

        G += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
        it += 1
        if record_objective:
            history.append(dual_objective(K, y, alpha))

    # Bias from free support vectors; otherwise midpoint of the KKT interval.
    free = (alpha > 0.0) & (alpha < C)
    neg_yG = -y * G
    if free.any():
        bias = float(neg_yG[free].mean())
    else:
        up = (pos & (alpha < C)) | (~pos & (alpha > 0.0))
        low = (pos & (alpha > 0.0)) | (~pos & (alpha < C))
        hi = neg_yG[up].max() if up.any() else -np.inf
        lo = neg_yG[low].min() if low.any() else np.inf
        bias = float((hi + lo) / 2.0) if np.isfinite(hi) and np.isfinite(lo) else 0.0
    return alpha, bias, converged, it, history


def train_binary(
    gram,
    labels,
    C: float,
    tol: float = 1e-3,
    max_iter: int | None = None,
    class_pair: tuple[str, str] = ("+1", "-1"),
) -> BinaryModel:
    """Train one binary model on a symmetric kernel matrix over a class pair.

    ``gram`` is a GramMatrix or plain array over the two-class subset and
    ``labels`` the corresponding +/-1 vector; support indices in the result
    refer to rows of that subset.
    """
    K = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    alpha, bias, converged, n_iter, _ = smo_solve(K, y, C, tol=tol, max_iter=max_iter)
    support = np.flatnonzero(alpha > 0.0)
    return BinaryModel(
        class_pair=class_pair,
        support_indices=[int(i) for i in support],
        dual_coefs=[float(alpha[i] * y[i]) for i in support],
        bias=bias,
        C=float(C),
        converged=converged,
        n_iter=n_iter,
    )


def train_multiclass(
    gram: GramMatrix,
    labels,
    C: float,
    tol: float = 1e-3,
    max_iter: int | None = None,
    poses: int | None = None,
) -> SvmModel:
    """One binary model per unordered class pair, trained on subset slices."""
    labels = list(labels)
    if len(labels) != len(gram.row_ids):
        raise ParamError(f"{len(labels)} labels for {len(gram.row_ids)} gram rows")
    class_set = sorted(set(labels))
    if len(class_set) < 2:
        raise LabelError(f"need >= 2 classes, got {class_set}")
    label_arr = np.asarray(labels, dtype=object)
    binaries = []
    for ca, cb in combinations(class_set, 2):
        idx = np.flatnonzero((label_arr == ca) | (label_arr == cb))
        y = np.where(label_arr[idx] == ca, 1.0, -1.0)
        sub = gram.values[np.ix_(idx, idx)]
        bm = train_binary(sub, y, C, tol=tol, max_iter=max_iter, class_pair=(ca, cb))
        bm.support_indices = [int(idx[i]) for i in bm.support_indices]
        binaries.append(bm)
    return SvmModel(
        binaries=binaries,
        class_set=class_set,
        spec=gram.spec,
        train_ids=list(gram.row_ids),
        poses=poses,
    )


def decision_values(model: SvmModel, cross: GramMatrix) -> np.ndarray:
    """Per-binary decision values, shape (n_test, n_binaries)."""
    if list(cross.col_ids) != list(model.train_ids):
        raise AlignmentError("cross-gram columns are not aligned with model.train_ids")
    out = np.empty((cross.values.shape[0], len(model.binaries)))
    for b, bm in enumerate(model.binaries):
        coefs = np.asarray(bm.dual_coefs)
        if bm.support_indices:
            out[:, b] = cross.values[:, bm.support_indices] @ coefs + bm.bias
        else:
            out[:, b] = bm.bias
    return out


def predict(model: SvmModel, cross: GramMatrix) -> list[str]:
    """Majority vote over all binaries; a decision >= 0 votes for class_pair[0].

    Ties are broken by the largest total |decision| accumulated on won
    binaries, then by class order.
    """
    dec = decision_values(model, cross)
    class_index = {c: i for i, c in enumerate(model.class_set)}
    n_test = dec.shape[0]
    votes = np.zeros((n_test, len(model.class_set)), dtype=np.int64)
    strength = np.zeros((n_test, len(model.class_set)))
    for b, bm in enumerate(model.binaries):
        ia, ib = class_index[bm.class_pair[0]], class_index[bm.class_pair[1]]
        first = dec[:, b] >= 0.0
        votes[first, ia] += 1
        votes[~first, ib] += 1
        mag = np.abs(dec[:, b])
        strength[first, ia] += mag[first]
        strength[~first, ib] += mag[~first]
    labels = []
    for r in range(n_test):
        best = int(np.argmax(votes[r]))
        tied = np.flatnonzero(votes[r] == votes[r, best])
        if tied.size > 1:
            best = int(tied[np.argmax(strength[r, tied])])
        labels.append(model.class_set[best])
    return labels


def save_model(path, model: SvmModel) -> None:
    payload = {
        "spec": model.spec.to_dict(),
        "class_set": model.class_set,
        "train_ids": model.train_ids,
        "poses": model.poses,
        "binaries": [
            {
                "class_pair": list(bm.class_pair),
                "support_indices": bm.support_indices,
                "dual_coefs": bm.dual_coefs,
                "bias": bm.bias,
                "C": bm.C,
                "converged": bm.converged,
            }
            for bm in model.binaries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


def load_model(path) -> SvmModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return SvmModel(
        binaries=[
            BinaryModel(
                class_pair=tuple(b["class_pair"]),
                support_indices=[int(i) for i in b["support_indices"]],
                dual_coefs=[float(v) for v in b["dual_coefs"]],
                bias=float(b["bias"]),
                C=float(b["C"]),
                converged=bool(b["converged"]),
            )
            for b in payload["binaries"]
        ],
        class_set=list(payload["class_set"]),
        spec=KernelSpec.from_dict(payload["spec"]),
        train_ids=list(payload["train_ids"]),
        poses=payload.get("poses"),
    )
