"""Frame-level features and labels for the contact detector.

The detector sees each strain profile mean-pooled into k bins. Labels come
from the ground-truth force channel thresholded at the contact threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Trial

CONTACT_FORCE_THRESHOLD_N = 0.01


def label_contact(
    force_N: np.ndarray, f_thresh: float = CONTACT_FORCE_THRESHOLD_N
) -> np.ndarray:
    """Binary contact labels: 1 where force >= f_thresh.

    Negative forces indicate a sensor fault upstream and are rejected.
    """
    force_N = np.asarray(force_N, dtype=float)
    if np.any(force_N < 0):
        raise ValueError("negative force in label_contact input")
    return (force_N >= f_thresh).astype(np.int64)


def downsample_profile(strain: np.ndarray, k: int) -> np.ndarray:
    """Mean-pool a strain profile (or a stack of them) into k bins.

    When the node count does not divide evenly, the leading bins get one
    extra node each, matching np.array_split.
    """
    strain = np.asarray(strain, dtype=float)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if strain.shape[-1] < k:
        raise ValueError(f"cannot pool {strain.shape[-1]} nodes into {k} bins")
    chunks = np.array_split(strain, k, axis=-1)
    return np.stack([c.mean(axis=-1) for c in chunks], axis=-1)


@dataclass
class DetectionSample:
    """One frame's detector input: the pooled strain, label, and group id."""

    x: np.ndarray
    y: int
    group: str


def build_detection_dataset(
    trials: list[Trial],
    k: int = 32,
    f_thresh: float = CONTACT_FORCE_THRESHOLD_N,
) -> list[DetectionSample]:
    """Flatten trials into per-frame detection samples.

    All trials must share one grid; the group id is the trial's test_id so
    splitters can keep whole trials together.
    """
    if not trials:
        raise ValueError("no trials given")
    grid = trials[0].grid
    for trial in trials[1:]:
        if trial.grid != grid:
            raise ValueError(
                f"trial {trial.test_id} has a different grid than {trials[0].test_id}"
            )
    samples = []
    for trial in trials:
        if trial.n_frames == 0:
            continue
        pooled = downsample_profile(trial.strain_matrix(), k)
        labels = label_contact(trial.gt_force_N, f_thresh)
        for i in range(trial.n_frames):
            samples.append(
                DetectionSample(x=pooled[i], y=int(labels[i]), group=trial.test_id)
            )
    return samples


def samples_to_arrays(
    samples: list[DetectionSample],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack samples into (X, y, groups) arrays."""
    if not samples:
        raise ValueError("no samples given")
    X = np.stack([s.x for s in samples])
    y = np.array([s.y for s in samples], dtype=np.int64)
    groups = np.array([s.group for s in samples])
    return X, y, groups
