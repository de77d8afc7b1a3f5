"""Uniform temporal down-sampling of pose sequences to a fixed pose count.

Whatever the source length T, a sequence is reduced to exactly L poses picked
evenly along the time axis (frames are repeated when T < L, so short clips are
over-sampled rather than padded). All elastic kernels operate on these
fixed-length sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PoseSequence
from .errors import EmptySequence, ParamError


@dataclass
class FixedSequence:
    """A pose sequence resampled to exactly L poses of dimension k."""

    poses: np.ndarray
    origin_length: int
    seq_id: str
    label: str
    subject: str

    def __post_init__(self):
        poses = np.ascontiguousarray(np.asarray(self.poses, dtype=np.float64))
        if poses.ndim != 2 or poses.shape[0] < 2:
            raise ParamError(f"poses must be (L >= 2, k), got shape {poses.shape}")
        self.poses = poses

    @property
    def L(self) -> int:
        return self.poses.shape[0]

    @property
    def k(self) -> int:
        return self.poses.shape[1]


def resample_indices(t: int, l: int) -> np.ndarray:
    """Source frame index for each of the ``l`` output slots.

    Slot i maps to round(i * (t - 1) / (l - 1)) with ties rounded half away
    from zero, computed in exact integer arithmetic.
    """
    if l < 2:
        raise ParamError(f"pose count must be >= 2, got {l}")
    if t < 1:
        raise EmptySequence("cannot resample an empty sequence")
    i = np.arange(l, dtype=np.int64)
    return (2 * i * (t - 1) + (l - 1)) // (2 * (l - 1))


def resample_uniform(seq: PoseSequence, l: int, interpolate: bool = False) -> FixedSequence:
    """Reduce (or over-sample) ``seq`` to exactly ``l`` poses evenly spread in time.

    The default picks nearest source frames, so no pose is invented and the
    first/last frames are always kept. ``interpolate`` switches to linear
    blending between the two neighbouring frames instead (experimental
    alternative, not used by the evaluation protocol).
    """
    if l < 2:
        raise ParamError(f"pose count must be >= 2, got {l}")
    t = seq.T
    if interpolate and t > 1:
        positions = np.arange(l, dtype=np.float64) * (t - 1) / (l - 1)
        lo = np.floor(positions).astype(np.int64)
        hi = np.minimum(lo + 1, t - 1)
        frac = (positions - lo)[:, None]
        poses = seq.frames[lo] * (1.0 - frac) + seq.frames[hi] * frac
    else:
        poses = seq.frames[resample_indices(t, l)]
    return FixedSequence(
        poses=poses,
        origin_length=t,
        seq_id=seq.seq_id,
        label=seq.label,
        subject=seq.subject,
    )


def resample_dataset(sequences, l: int, interpolate: bool = False) -> list[FixedSequence]:
    return [resample_uniform(s, l, interpolate=interpolate) for s in sequences]
