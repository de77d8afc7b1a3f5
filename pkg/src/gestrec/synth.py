"""Synthetic gesture generator: lets the full pipeline run without licensed data.

Each class is a smooth random trajectory template; instances apply a random
monotone time warp, a per-subject style (consistent warp bias, offset and
amplitude), additive noise and a random length. Time-warp jitter is the
dominant nuisance, which is exactly what elastic kernels should absorb and a
frame-aligned Euclidean comparison should not.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset, PoseSequence
from .errors import ParamError

NOISE_PROFILES = {
    "easy": {
        "spatial_noise": 0.05,
        "warp_strength": 1.0,
        "subject_warp": 0.25,
        "subject_spatial": 0.08,
        "amp_jitter": 0.08,
    },
    "hard": {
        "spatial_noise": 0.30,
        "warp_strength": 1.8,
        "subject_warp": 0.55,
        "subject_spatial": 0.30,
        "amp_jitter": 0.25,
    },
}

_WARP_KNOTS = 8
_HARMONICS = 3


def _template(rng: np.random.Generator, k: int):
    amps = rng.normal(0.0, 1.0, (k, _HARMONICS)) / np.arange(1, _HARMONICS + 1)
    freqs = rng.uniform(0.5, 2.0, (k, _HARMONICS))
    phases = rng.uniform(0.0, 2.0 * np.pi, (k, _HARMONICS))
    return amps, freqs, phases


def _eval_template(template, u: np.ndarray) -> np.ndarray:
    amps, freqs, phases = template
    angles = 2.0 * np.pi * freqs[None, :, :] * u[:, None, None] + phases[None, :, :]
    return (amps[None, :, :] * np.sin(angles)).sum(axis=2)


def _random_warp(rng: np.random.Generator, strength: float, t: int) -> np.ndarray:
    """Random monotone map of [0, 1] onto itself, identity when strength = 0."""
    weights = np.exp(strength * rng.normal(0.0, 1.0, _WARP_KNOTS))
    knots = np.concatenate(([0.0], np.cumsum(weights)))
    knots /= knots[-1]
    grid = np.linspace(0.0, 1.0, _WARP_KNOTS + 1)
    return np.interp(np.linspace(0.0, 1.0, t), grid, knots)


def make_gesture_dataset(
    n_classes: int = 10,
    n_subjects: int = 10,
    reps: int = 2,
    n_joints: int = 2,
    noise: str = "easy",
    seed: int = 0,
    length_range: tuple[int, int] = (40, 90),
) -> Dataset:
    """Generate ``n_classes * n_subjects * reps`` labelled gesture sequences."""
    if noise not in NOISE_PROFILES:
        raise ParamError(f"unknown noise profile {noise!r}; use one of {sorted(NOISE_PROFILES)}")
    if n_classes < 1 or n_subjects < 1 or reps < 1 or n_joints < 1:
        raise ParamError("n_classes, n_subjects, reps and n_joints must be >= 1")
    lo, hi = length_range
    if lo < 2 or hi < lo:
        raise ParamError(f"bad length range {length_range}")
    profile = NOISE_PROFILES[noise]
    rng = np.random.default_rng(seed)
    k = 3 * n_joints

    templates = [_template(rng, k) for _ in range(n_classes)]
    subject_warp_bias = np.exp(rng.normal(0.0, profile["subject_warp"], n_subjects))
    subject_offset = rng.normal(0.0, profile["subject_spatial"], (n_subjects, k))
    subject_amp = 1.0 + rng.normal(0.0, profile["amp_jitter"], n_subjects)

    sequences = []
    for c in range(n_classes):
        label = f"g{c:02d}"
        for s in range(n_subjects):
            subject = f"s{s:02d}"
            for r in range(reps):
                t = int(rng.integers(lo, hi + 1))
                u = _random_warp(rng, profile["warp_strength"], t)
                u = u ** subject_warp_bias[s]
                frames = subject_amp[s] * _eval_template(templates[c], u)
                frames += subject_offset[s][None, :]
                frames += rng.normal(0.0, profile["spatial_noise"], frames.shape)
                sequences.append(
                    PoseSequence(
                        seq_id=f"{label}-{subject}-r{r}",
                        label=label,
                        subject=subject,
                        frames=frames,
                        n_joints=n_joints,
                    )
                )
    return Dataset.from_sequences(sequences)
