"""Skeletal motion data model: parsing, validation and root-relative pose vectors.

A pose is a flat vector of 3D joint positions, one frame per time step.
Sequences become comparable across capture systems once every joint is
expressed relative to the skeleton root and the root itself is dropped.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    EmptySequence,
    MalformedFile,
    ParseError,
    SchemaError,
    StateError,
)

#: Number of values per joint in the raw skeleton text format (x, y, z, confidence).
MSR_VALUES_PER_JOINT = 4

_MSR_NAME_RE = re.compile(r"a(\d+)_s(\d+)_e(\d+)", re.IGNORECASE)


@dataclass
class PoseSequence:
    """One gesture: ``T`` frames of ``k``-dimensional pose vectors plus metadata.

    ``frames`` has shape (T, k) with k = 3 * n_joints. ``relativized`` records
    whether the root joint has already been subtracted and removed; the flag
    guards against applying the transform twice.
    """

    seq_id: str
    label: str
    subject: str
    frames: np.ndarray
    n_joints: int
    source_rate_hz: float | None = None
    relativized: bool = False

    def __post_init__(self):
        frames = np.ascontiguousarray(np.asarray(self.frames, dtype=np.float64))
        if frames.ndim != 2:
            raise DimensionError(f"frames must be 2-D (T, k), got shape {frames.shape}")
        if frames.shape[0] < 1:
            raise EmptySequence(f"sequence {self.seq_id!r} has no frames")
        if self.n_joints < 1:
            raise DimensionError(f"n_joints must be positive, got {self.n_joints}")
        if frames.shape[1] != 3 * self.n_joints:
            raise DimensionError(
                f"sequence {self.seq_id!r}: frame dimension {frames.shape[1]} "
                f"!= 3 * {self.n_joints} joints"
            )
        if not np.isfinite(frames).all():
            raise MalformedFile(f"sequence {self.seq_id!r} contains non-finite values")
        if self.source_rate_hz is not None and not self.source_rate_hz > 0:
            raise DimensionError(f"source_rate_hz must be > 0, got {self.source_rate_hz}")
        self.frames = frames

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def k(self) -> int:
        return self.frames.shape[1]


@dataclass
class Dataset:
    """A labelled collection of pose sequences sharing one frame dimension."""

    sequences: list[PoseSequence]
    class_set: list[str]
    subject_set: list[str]

    @classmethod
    def from_sequences(cls, sequences: list[PoseSequence]) -> "Dataset":
        ks = {s.k for s in sequences}
        if len(ks) > 1:
            raise DimensionError(f"sequences disagree on frame dimension: {sorted(ks)}")
        labels = sorted({s.label for s in sequences})
        subjects = sorted({s.subject for s in sequences})
        return cls(sequences=list(sequences), class_set=labels, subject_set=subjects)

    @property
    def n(self) -> int:
        return len(self.sequences)

    @property
    def k(self) -> int:
        if not self.sequences:
            raise EmptySequence("dataset has no sequences")
        return self.sequences[0].k


def _tokens_to_floats(text: str) -> np.ndarray:
    tokens = text.split()
    values = np.empty(len(tokens), dtype=np.float64)
    for pos, tok in enumerate(tokens, start=1):
        try:
            values[pos - 1] = float(tok)
        except ValueError:
            raise ParseError(pos, f"not a number: {tok!r}") from None
    return values


def parse_msr_skeleton(
    text: str,
    n_joints: int,
    has_header: bool = False,
    seq_id: str = "",
    label: str = "",
    subject: str = "",
    rate_hz: float | None = None,
) -> PoseSequence:
    """Parse a whitespace-separated skeleton stream into a raw pose sequence.

    Each frame carries ``n_joints`` joints of 4 values (x, y, z, confidence);
    the confidence column is dropped. The frame count is inferred from the
    token count. With ``has_header`` set, one leading count token per frame is
    skipped, accommodating files that prefix each frame block with a row count.
    """
    if n_joints < 1:
        raise DimensionError(f"n_joints must be positive, got {n_joints}")
    values = _tokens_to_floats(text)
    frame_span = n_joints * MSR_VALUES_PER_JOINT + (1 if has_header else 0)
    if values.size == 0 or values.size % frame_span != 0:
        if values.size != 0:
            raise MalformedFile(
                f"{values.size} values not divisible by {frame_span} per frame "
                f"({n_joints} joints x {MSR_VALUES_PER_JOINT}"
                + (" + header" if has_header else "")
                + ")"
            )
        raise EmptySequence("no frames in input")
    frames = values.reshape(-1, frame_span)
    if has_header:
        frames = frames[:, 1:]
    joints = frames.reshape(frames.shape[0], n_joints, MSR_VALUES_PER_JOINT)
    xyz = joints[:, :, :3].reshape(frames.shape[0], 3 * n_joints)
    return PoseSequence(
        seq_id=seq_id,
        label=label,
        subject=subject,
        frames=xyz,
        n_joints=n_joints,
        source_rate_hz=rate_hz,
    )


def msr_meta_from_name(name: str) -> tuple[str, str, str]:
    """Derive (label, subject, seq_id) from an ``aXX_sYY_eZZ``-style file name."""
    m = _MSR_NAME_RE.search(name)
    if not m:
        raise MalformedFile(f"cannot derive action/subject from file name {name!r}")
    return f"a{m.group(1)}", f"s{m.group(2)}", m.group(0).lower()


def root_relativize(seq: PoseSequence, root_joint: int) -> PoseSequence:
    """Express every joint relative to ``root_joint`` and drop the root.

    Output frame dimension is 3 * (N - 1). Applying the transform twice is an
    error; the result carries ``relativized=True``.
    """
    if seq.relativized:
        raise StateError(f"sequence {seq.seq_id!r} is already root-relative")
    if not 0 <= root_joint < seq.n_joints:
        raise IndexError(
            f"root joint {root_joint} out of range for {seq.n_joints} joints"
        )
    joints = seq.frames.reshape(seq.T, seq.n_joints, 3)
    rel = joints - joints[:, root_joint : root_joint + 1, :]
    rel = np.delete(rel, root_joint, axis=1)
    return PoseSequence(
        seq_id=seq.seq_id,
        label=seq.label,
        subject=seq.subject,
        frames=rel.reshape(seq.T, 3 * (seq.n_joints - 1)),
        n_joints=seq.n_joints - 1,
        source_rate_hz=seq.source_rate_hz,
        relativized=True,
    )


_REQUIRED_KEYS = ("id", "label", "subject", "rate_hz", "n_joints", "frames")


def _record_to_sequence(record: dict, line: int) -> PoseSequence:
    for key in _REQUIRED_KEYS:
        if key not in record:
            raise SchemaError(line, f"missing key {key!r}")
    if not isinstance(record["id"], str):
        raise SchemaError(line, "'id' must be a string")
    label = record["label"]
    if label is None:
        label = ""  # unlabeled record, admissible for prediction inputs
    if not isinstance(label, str):
        raise SchemaError(line, "'label' must be a string or null")
    if not isinstance(record["subject"], str):
        raise SchemaError(line, "'subject' must be a string")
    rate = record["rate_hz"]
    if rate is not None and (isinstance(rate, bool) or not isinstance(rate, (int, float))):
        raise SchemaError(line, "'rate_hz' must be a number or null")
    if rate is not None and not rate > 0:
        raise SchemaError(line, f"'rate_hz' must be > 0, got {rate}")
    if not isinstance(record["n_joints"], int) or isinstance(record["n_joints"], bool):
        raise SchemaError(line, "'n_joints' must be an integer")
    frames = record["frames"]
    if not isinstance(frames, list) or not frames:
        raise SchemaError(line, "'frames' must be a non-empty list of frames")
    k = 3 * record["n_joints"]
    for frame in frames:
        if not isinstance(frame, list) or any(
            not isinstance(v, (int, float)) or isinstance(v, bool) for v in frame
        ):
            raise SchemaError(line, "each frame must be a list of numbers")
        if len(frame) != k:
            raise DimensionError(
                f"line {line}: frame of length {len(frame)} != 3 * "
                f"{record['n_joints']} joints"
            )
    try:
        return PoseSequence(
            seq_id=record["id"],
            label=label,
            subject=record["subject"],
            frames=np.asarray(frames, dtype=np.float64),
            n_joints=record["n_joints"],
            source_rate_hz=float(rate) if rate is not None else None,
            relativized=bool(record.get("relativized", False)),
        )
    except MalformedFile as exc:
        raise MalformedFile(f"line {line}: {exc}") from None


def parse_generic(document: str) -> Dataset:
    """Parse a JSON-lines dataset document (one sequence object per line)."""
    sequences: list[PoseSequence] = []
    seen: set[tuple[str, str, str]] = set()
    for line_no, raw in enumerate(document.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError(line_no, f"invalid JSON ({exc.msg})") from None
        if not isinstance(record, dict):
            raise SchemaError(line_no, "each line must be a JSON object")
        seq = _record_to_sequence(record, line_no)
        key = (seq.label, seq.subject, seq.seq_id)
        if key in seen:
            raise SchemaError(line_no, f"duplicate (label, subject, id) triple {key}")
        seen.add(key)
        sequences.append(seq)
    if not sequences:
        return Dataset(sequences=[], class_set=[], subject_set=[])
    return Dataset.from_sequences(sequences)


def serialize_generic(dataset: Dataset) -> str:
    """Serialize a dataset to JSON lines; round-trips bit-exactly through parse."""
    lines = []
    for seq in dataset.sequences:
        record = {
            "id": seq.seq_id,
            "label": seq.label,
            "subject": seq.subject,
            "rate_hz": seq.source_rate_hz,
            "n_joints": seq.n_joints,
            "frames": [[float(v) for v in frame] for frame in seq.frames],
        }
        if seq.relativized:
            record["relativized"] = True
        lines.append(json.dumps(record, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_generic(fh.read())


def save_dataset(path, dataset: Dataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_generic(dataset))
