"""Elastic similarity measures and their exponential kernel wrappers.

Three families are supported:

* ``euclid`` — pose-aligned squared Euclidean distance (valid only because all
  sequences are resampled to one length), wrapped as exp(-d / sigma).
* ``dtw`` — dynamic time warping over squared-Euclidean local costs, wrapped
  as exp(-d / sigma). Not positive semi-definite.
* ``rdtw`` — regularized DTW: the min over alignment paths is replaced by a
  stiffness-weighted sum over paths, giving a symmetric positive measure. Raw
  values spread over many orders of magnitude, so a data-dependent
  normalization (alpha, beta) fitted on training pairs maps them into [1, e]
  before the exponential wrapper exp(normalized / sigma) is applied.

Note: the raw rdtw measure is an unnormalized sum over paths, so the
self-similarity kdtw_raw(X, X) is *not* guaranteed to dominate kdtw_raw(X, Y);
no code here relies on diagonal dominance of the raw Gram.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _dp
from .errors import DimensionError, DomainError, ParamError, StateError
from .resample import FixedSequence

FAMILIES = ("euclid", "dtw", "rdtw")

_FAMILY_CODES = {
    "euclid": _dp.FAMILY_EUCLID,
    "dtw": _dp.FAMILY_DTW,
    "rdtw": _dp.FAMILY_RDTW,
}

#: Relative spread below which normalization falls back to alpha=1, beta=1/min.
DEGENERATE_SPREAD = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus parameters and fitted normalization constants.

    ``alpha``/``beta`` are present only on a fitted ``rdtw`` spec. ``corridor``
    optionally restricts rdtw alignments to the band |p - q| <= corridor.
    """

    family: str
    nu: float = 1.0
    sigma: float = 1.0
    alpha: float | None = None
    beta: float | None = None
    corridor: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParamError(f"unknown kernel family {self.family!r}")
        if not self.nu > 0 or not math.isfinite(self.nu):
            raise ParamError(f"nu must be finite and > 0, got {self.nu}")
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise ParamError(f"sigma must be finite and > 0, got {self.sigma}")
        if self.corridor is not None and self.corridor < 0:
            raise ParamError(f"corridor must be >= 0, got {self.corridor}")
        if self.family != "rdtw" and (self.alpha is not None or self.beta is not None):
            raise ParamError("alpha/beta apply only to the rdtw family")

    @property
    def fitted(self) -> bool:
        return self.family != "rdtw" or (self.alpha is not None and self.beta is not None)

    def with_normalization(self, alpha: float, beta: float) -> "KernelSpec":
        if self.family != "rdtw":
            raise StateError("only rdtw specs carry normalization constants")
        return replace(self, alpha=alpha, beta=beta)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "nu": self.nu,
            "sigma": self.sigma,
            "alpha": self.alpha,
            "beta": self.beta,
            "corridor": self.corridor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(
            family=d["family"],
            nu=d.get("nu", 1.0),
            sigma=d.get("sigma", 1.0),
            alpha=d.get("alpha"),
            beta=d.get("beta"),
            corridor=d.get("corridor"),
        )


def _poses_of(x) -> np.ndarray:
    if isinstance(x, FixedSequence):
        return x.poses
    arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise DimensionError(f"expected a (L, k) pose array, got shape {arr.shape}")
    return arr


def d_euclid_sq(a, b) -> float:
    """Squared Euclidean distance summed over aligned poses."""
    pa, pb = _poses_of(a), _poses_of(b)
    if pa.shape != pb.shape:
        raise DimensionError(f"shape mismatch: {pa.shape} vs {pb.shape}")
    return float(_dp.euclid_sq_pair(pa, pb))


def d_dtw(a, b) -> float:
    """Dynamic time warping distance with squared-Euclidean local cost."""
    pa, pb = _poses_of(a), _poses_of(b)
    if pa.shape[1] != pb.shape[1]:
        raise DimensionError(f"pose dimension mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    return float(_dp.dtw_pair(pa, pb))


def kdtw_raw(a, b, nu: float, corridor: int | None = None) -> float:
    """Raw regularized-DTW similarity (pre-normalization); strictly positive."""
    if not nu > 0 or not math.isfinite(nu):
        raise ParamError(f"nu must be finite and > 0, got {nu}")
    if corridor is not None and corridor < 0:
        raise ParamError(f"corridor must be >= 0, got {corridor}")
    pa, pb = _poses_of(a), _poses_of(b)
    if pa.shape[1] != pb.shape[1]:
        raise DimensionError(f"pose dimension mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    return float(_dp.kdtw_pair(pa, pb, nu, -1 if corridor is None else int(corridor)))


def fit_normalization(raw_values) -> tuple[float, float]:
    """Fit (alpha, beta) so beta * min**alpha = 1 and beta * max**alpha = e.

    alpha = 1 / ln(max/min) and beta = exp(-alpha * ln(min)), taken over the
    supplied training-pair values. A degenerate spread (max ~= min) falls back
    to alpha = 1, beta = 1/min with a warning, mapping every value to 1.
    """
    vals = np.asarray(list(raw_values), dtype=np.float64)
    if vals.size == 0:
        raise ParamError("cannot fit normalization on an empty value set")
    if not np.isfinite(vals).all() or (vals <= 0.0).any():
        raise DomainError("raw similarity values must be finite and > 0")
    m = float(vals.min())
    big = float(vals.max())
    if big / m <= 1.0 + DEGENERATE_SPREAD:
        warnings.warn(
            "degenerate similarity spread; falling back to alpha=1, beta=1/min",
            RuntimeWarning,
            stacklevel=2,
        )
        alpha, beta = 1.0, 1.0 / m
    else:
        alpha = 1.0 / (math.log(big) - math.log(m))
        log_beta = -alpha * math.log(m)
        if not math.isfinite(log_beta) or abs(log_beta) > 709.0:
            raise DomainError(
                f"normalization scale exp({log_beta:.1f}) leaves float64 range "
                f"(min={m!r}, max={big!r}): spread too narrow for these magnitudes"
            )
        beta = math.exp(log_beta)
    if not math.isfinite(beta) or beta <= 0.0:
        raise DomainError(
            f"normalization scale leaves float64 range (min={m!r}, max={big!r})"
        )
    return alpha, beta


def normalize_raw(raw, alpha: float, beta: float):
    """Apply beta * raw**alpha, evaluated in log space for range safety."""
    raw = np.asarray(raw, dtype=np.float64)
    return np.exp(alpha * np.log(raw) + math.log(beta))


def wrap_values(spec: KernelSpec, raw):
    """Map raw measure values to kernel values for ``spec``'s family."""
    raw = np.asarray(raw, dtype=np.float64)
    if spec.family == "rdtw":
        if not spec.fitted:
            raise StateError("rdtw spec is unfitted: no alpha/beta available")
        return np.exp(normalize_raw(raw, spec.alpha, spec.beta) / spec.sigma)
    return np.exp(-raw / spec.sigma)


def raw_measure(spec: KernelSpec, a, b) -> float:
    """The family's raw measure before any exponential wrapping."""
    if spec.family == "euclid":
        return d_euclid_sq(a, b)
    if spec.family == "dtw":
        return d_dtw(a, b)
    return kdtw_raw(a, b, spec.nu, spec.corridor)


def kernel_eval(spec: KernelSpec, a, b) -> float:
    """Kernel value between two fixed-length sequences under ``spec``."""
    if spec.family == "rdtw" and not spec.fitted:
        raise StateError("rdtw spec is unfitted: fit normalization on training pairs first")
    return float(wrap_values(spec, raw_measure(spec, a, b)))


def family_code(family: str) -> int:
    try:
        return _FAMILY_CODES[family]
    except KeyError:
        raise ParamError(f"unknown kernel family {family!r}") from None
