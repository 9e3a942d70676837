"""Shared vocabulary: arc-length geometry, strain frames, and labeled trials.

Units are fixed across the codebase: lengths in millimeters, forces in
newtons, time in seconds, strain in microstrain.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class TrialFormatError(Exception):
    """Raised when a trial file violates the on-disk schema."""


class TrainingDivergedError(Exception):
    """Raised when an optimization run produces a non-finite loss."""


class ConfigError(Exception):
    """Raised on malformed or unknown configuration input."""


class Side(Enum):
    """Bending direction relative to the embedded fiber.

    Bending toward the fiber (convex) puts it in tension, bending away
    (concave) in compression.
    """

    CONVEX = "cv"
    CONCAVE = "cc"

    @property
    def strain_sign(self) -> float:
        return 1.0 if self is Side.CONVEX else -1.0

    @classmethod
    def from_str(cls, s: str) -> "Side":
        for side in cls:
            if s in (side.value, side.name.lower()):
                return side
        raise ValueError(f"unknown side {s!r} (expected 'cv' or 'cc')")


# Default geometry: a 170 mm arm sampled at 263 strain nodes and split into
# 64 equal segments. 263 nodes at exactly 0.65 mm pitch would overrun the
# 170 mm length (262 * 0.65 = 170.3), so the default pitch is the exact
# value that spans [0, L]: 170/262 ~= 0.6489 mm (0.65 mm nominal).
DEFAULT_LENGTH_MM = 170.0
DEFAULT_N_NODES = 263
DEFAULT_N_SEGMENTS = 64


@dataclass(frozen=True)
class ArcGrid:
    """Arc-length sampling grid: strain nodes plus the segment partition."""

    length_mm: float = DEFAULT_LENGTH_MM
    n_nodes: int = DEFAULT_N_NODES
    node_pitch_mm: float = DEFAULT_LENGTH_MM / (DEFAULT_N_NODES - 1)
    n_segments: int = DEFAULT_N_SEGMENTS

    def __post_init__(self) -> None:
        if self.length_mm <= 0:
            raise ValueError(f"length_mm must be positive, got {self.length_mm}")
        if self.n_nodes < 2:
            raise ValueError(f"n_nodes must be >= 2, got {self.n_nodes}")
        if self.n_segments < 1:
            raise ValueError(f"n_segments must be >= 1, got {self.n_segments}")
        if self.node_pitch_mm <= 0:
            raise ValueError(f"node_pitch_mm must be positive, got {self.node_pitch_mm}")
        last = (self.n_nodes - 1) * self.node_pitch_mm
        if last > self.length_mm:
            raise ValueError(
                f"last node at {last} mm overruns length {self.length_mm} mm"
            )

    @property
    def segment_len_mm(self) -> float:
        return self.length_mm / self.n_segments

    def node_positions_mm(self) -> np.ndarray:
        """Positions s_i = i * pitch of the strain nodes, shape (n_nodes,)."""
        return np.arange(self.n_nodes) * self.node_pitch_mm

    def segment_centers_mm(self) -> np.ndarray:
        """Centers of the localization segments, shape (n_segments,)."""
        return (np.arange(self.n_segments) + 0.5) * self.segment_len_mm


def segment_index(grid: ArcGrid, s_mm: float) -> int:
    """Map an arc-length position to its segment index.

    Segments are the half-open intervals [j*dL, (j+1)*dL); the right
    endpoint s = L closes into the last segment so the whole domain is
    covered.
    """
    if not 0.0 <= s_mm <= grid.length_mm:
        raise ValueError(f"s_mm={s_mm} outside [0, {grid.length_mm}]")
    j = math.floor(s_mm / grid.segment_len_mm)
    return min(j, grid.n_segments - 1)


def segment_center(grid: ArcGrid, j: int) -> float:
    """Arc-length position of the center of segment j."""
    if not 0 <= j < grid.n_segments:
        raise ValueError(f"segment index {j} outside [0, {grid.n_segments})")
    return (j + 0.5) * grid.segment_len_mm


@dataclass(frozen=True, eq=False)
class StrainFrame:
    """One time sample: the full strain vector plus synchronized scalars."""

    t_s: float
    strain: np.ndarray  # microstrain, length n_nodes
    motor_pos: float
    force_N: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.strain, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "strain", arr)
        if self.force_N < 0:
            raise ValueError(f"force_N must be >= 0, got {self.force_N}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StrainFrame):
            return NotImplemented
        return (
            self.t_s == other.t_s
            and self.motor_pos == other.motor_pos
            and self.force_N == other.force_N
            and np.array_equal(self.strain, other.strain)
        )


TEST_ID_PATTERN = re.compile(r"^(cv|cc)_[1-8]$")


@dataclass(eq=False)
class Trial:
    """A labeled time series of frames from one experimental run.

    ``gt_force_N`` is the per-frame ground-truth contact force (zero before
    contact); ``gt_contact_s_mm`` is the arc-length contact location, absent
    for no-contact runs.
    """

    test_id: str
    side: Side
    grid: ArcGrid
    frames: list[StrainFrame]
    gt_contact_s_mm: float | None = None
    gt_force_N: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        self.gt_force_N = np.asarray(self.gt_force_N, dtype=np.float64)
        if len(self.gt_force_N) != len(self.frames):
            raise ValueError(
                f"gt_force_N has {len(self.gt_force_N)} entries for "
                f"{len(self.frames)} frames"
            )
        if self.gt_contact_s_mm is not None and not (
            0.0 <= self.gt_contact_s_mm <= self.grid.length_mm
        ):
            raise ValueError(
                f"gt_contact_s_mm={self.gt_contact_s_mm} outside "
                f"[0, {self.grid.length_mm}]"
            )
        for i, f in enumerate(self.frames):
            if len(f.strain) != self.grid.n_nodes:
                raise ValueError(
                    f"frame {i}: strain length {len(f.strain)} != grid "
                    f"n_nodes {self.grid.n_nodes}"
                )
        times = self.times()
        if len(times) > 1 and np.any(np.diff(times) < 0):
            raise ValueError("frame timestamps must be non-decreasing")

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def times(self) -> np.ndarray:
        return np.array([f.t_s for f in self.frames])

    def motor_positions(self) -> np.ndarray:
        return np.array([f.motor_pos for f in self.frames])

    def forces(self) -> np.ndarray:
        return np.array([f.force_N for f in self.frames])

    def strain_matrix(self) -> np.ndarray:
        """Frames stacked as a (n_frames, n_nodes) array."""
        if not self.frames:
            return np.zeros((0, self.grid.n_nodes))
        return np.stack([f.strain for f in self.frames])

    def contact_labels(self, f_thresh_N: float = 0.01) -> np.ndarray:
        """Binary contact state per frame from the ground-truth force."""
        return (self.gt_force_N >= f_thresh_N).astype(np.int64)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trial):
            return NotImplemented
        return (
            self.test_id == other.test_id
            and self.side == other.side
            and self.grid == other.grid
            and self.gt_contact_s_mm == other.gt_contact_s_mm
            and np.array_equal(self.gt_force_N, other.gt_force_N)
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )
