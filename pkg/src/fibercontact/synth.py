"""Synthetic trial generator: bending strain plus a localized contact bump.

The strain model is deliberately simple. Bending produces a half-sine
strain profile whose amplitude ramps with motor position; an external
contact adds a Gaussian bump centered at the contact location whose height
is proportional to the contact force. Concave runs carry the opposite
strain sign and a reduced-contrast bump, reproducing the asymmetry of a
fiber embedded on one side of the arm. Gaussian node noise keeps the
detection problem nontrivial.

Every trial is a pure function of its config (seed included), so datasets
regenerate bit-identically.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ArcGrid, Side, StrainFrame, Trial

# Default contact locations sit at segment centers, spread along the arm.
DEFAULT_CONTACT_PAIR_SEGMENTS = (8, 24, 40, 56)
DEFAULT_PAIR_OFFSET_MM = 0.6


@dataclass(frozen=True)
class SynthConfig:
    """Full recipe for one synthetic trial."""

    grid: ArcGrid
    side: Side = Side.CONVEX
    contact_s_mm: float | None = None  # None -> no-contact trial
    test_id: str = "trial_0"
    fiber_offset_mm: float = 0.5
    curvature_gain: float = 15.0  # microstrain per mm offset per motor unit
    motor_rate_per_s: float = 1.0
    noise_std_microstrain: float = 2.0
    frame_rate_hz: float = 20.0
    max_force_N: float = 0.10
    force_ramp_N_per_s: float = 0.02
    contact_onset_s: float = 5.0
    perturb_width_mm: float = 8.0
    perturb_gain_microstrain_per_N: float = 3200.0
    concave_contrast: float = 0.6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.contact_s_mm is not None and not (
            0.0 <= self.contact_s_mm <= self.grid.length_mm
        ):
            raise ValueError(
                f"contact_s_mm={self.contact_s_mm} outside [0, {self.grid.length_mm}]"
            )
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be positive")
        if self.noise_std_microstrain < 0:
            raise ValueError("noise_std_microstrain must be >= 0")
        if self.fiber_offset_mm <= 0:
            raise ValueError("fiber_offset_mm must be positive")
        if self.force_ramp_N_per_s <= 0:
            raise ValueError("force_ramp_N_per_s must be positive")
        if self.max_force_N <= 0:
            raise ValueError("max_force_N must be positive")
        if self.contact_onset_s < 0:
            raise ValueError("contact_onset_s must be >= 0")


def baseline_strain(
    grid: ArcGrid,
    curvature_amplitude: float,
    side: Side,
    fiber_offset_mm: float,
) -> np.ndarray:
    """Bending strain at every node for a half-sine curvature profile.

    Returns sign(side) * amplitude * sin(pi*s/L) * offset in microstrain;
    convex bending is tensile (+), concave compressive (-).
    """
    s = grid.node_positions_mm()
    profile = np.sin(np.pi * s / grid.length_mm)
    return side.strain_sign * curvature_amplitude * profile * fiber_offset_mm


def contact_perturbation(
    grid: ArcGrid,
    contact_s_mm: float,
    force_N: float,
    side: Side,
    width_mm: float = 8.0,
    gain_microstrain_per_N: float = 400.0,
    concave_contrast: float = 0.6,
) -> np.ndarray:
    """Strain bump induced by a point contact, linear in the contact force.

    A Gaussian of width ``width_mm`` centered at the contact location. The
    indentation pulls the fiber toward tension regardless of bending
    direction, so the bump sign is fixed; the concave side sees it at
    reduced contrast.
    """
    if not 0.0 <= contact_s_mm <= grid.length_mm:
        raise ValueError(
            f"contact_s_mm={contact_s_mm} outside [0, {grid.length_mm}]"
        )
    if force_N < 0:
        raise ValueError("force_N must be >= 0")
    s = grid.node_positions_mm()
    shape = np.exp(-((s - contact_s_mm) ** 2) / (2.0 * width_mm**2))
    contrast = 1.0 if side is Side.CONVEX else concave_contrast
    return contrast * gain_microstrain_per_N * force_N * shape


def _force_schedule(cfg: SynthConfig, times: np.ndarray) -> np.ndarray:
    if cfg.contact_s_mm is None:
        return np.zeros_like(times)
    return np.maximum(
        0.0, cfg.force_ramp_N_per_s * (times - cfg.contact_onset_s)
    )


def simulate_trial(cfg: SynthConfig) -> Trial:
    """Generate one trial; ends at the first frame with force >= max_force_N.

    The motor ramps linearly for the whole run; the contact force ramps
    from zero at the configured onset. Ground truth (contact location and
    per-frame force) is recorded exactly.
    """
    ramp_span_s = cfg.max_force_N / cfg.force_ramp_N_per_s
    if cfg.contact_s_mm is None:
        horizon_s = cfg.contact_onset_s + ramp_span_s
    else:
        # margin past the nominal crossing so the >= max_force frame exists
        horizon_s = cfg.contact_onset_s + ramp_span_s + 2.0
    n = int(np.floor(horizon_s * cfg.frame_rate_hz)) + 1
    times = np.arange(n) / cfg.frame_rate_hz
    gt_force = _force_schedule(cfg, times)

    if cfg.contact_s_mm is not None:
        over = np.nonzero(gt_force >= cfg.max_force_N)[0]
        end = over[0]  # guaranteed by the horizon margin
        times = times[: end + 1]
        gt_force = gt_force[: end + 1]
        n = end + 1

    motor = cfg.motor_rate_per_s * times
    rng = np.random.default_rng(cfg.seed)
    frames = []
    for k in range(n):
        strain = baseline_strain(
            cfg.grid, cfg.curvature_gain * motor[k], cfg.side, cfg.fiber_offset_mm
        )
        if cfg.contact_s_mm is not None:
            strain = strain + contact_perturbation(
                cfg.grid,
                cfg.contact_s_mm,
                gt_force[k],
                cfg.side,
                cfg.perturb_width_mm,
                cfg.perturb_gain_microstrain_per_N,
                cfg.concave_contrast,
            )
        if cfg.noise_std_microstrain > 0:
            strain = strain + rng.normal(
                0.0, cfg.noise_std_microstrain, cfg.grid.n_nodes
            )
        frames.append(
            StrainFrame(
                t_s=times[k],
                strain=strain,
                motor_pos=motor[k],
                force_N=gt_force[k],
            )
        )
    return Trial(
        test_id=cfg.test_id,
        side=cfg.side,
        grid=cfg.grid,
        frames=frames,
        gt_contact_s_mm=cfg.contact_s_mm,
        gt_force_N=gt_force,
    )


def default_contact_locations_mm(grid: ArcGrid) -> list[float]:
    """Eight contact locations: four probed regions, two touch points each.

    The two points of a region sit 1.2 mm apart inside one segment but
    belong to different test ids. Held-out evaluation therefore scores a
    segment that some other id also touched, instead of a segment no
    training trial ever excited; with strictly isolated locations the
    per-segment output units face pure extrapolation and systematically
    underestimate force there.
    """
    d = grid.segment_len_mm
    out = []
    for j in DEFAULT_CONTACT_PAIR_SEGMENTS:
        center = (j + 0.5) * d
        out.append(center - DEFAULT_PAIR_OFFSET_MM)
        out.append(center + DEFAULT_PAIR_OFFSET_MM)
    return out


def make_benchmark_dataset(
    base_cfg: SynthConfig,
    seed: int,
    locations_mm: list[float] | None = None,
    n_repeats: int = 3,
    n_no_contact: int = 0,
    onset_jitter_s: float = 0.75,
    gain_jitter: float = 0.0,
) -> list[Trial]:
    """Generate the standard benchmark: 8 locations x 2 sides x 3 repeats.

    Repetitions of one (side, location) pair share a test_id (cv_1..cv_8,
    cc_1..cc_8). Contact onset is jittered per trial, so timing is
    repeatable but not exact, as when an obstacle is repositioned by hand
    between repetitions; gain_jitter optionally varies the strain-per-
    newton gain per trial the same way (contact-pad compliance), off by
    default. Optional no-contact trials get ids nc_1..nc_k with
    alternating sides.
    """
    if locations_mm is None:
        locations_mm = default_contact_locations_mm(base_cfg.grid)
    trials = []
    for side_idx, side in enumerate((Side.CONVEX, Side.CONCAVE)):
        for loc_idx, s_c in enumerate(locations_mm, start=1):
            for rep in range(n_repeats):
                ss = np.random.SeedSequence((seed, side_idx, loc_idx, rep))
                trial_seed, onset_u32, gain_u32 = (
                    int(v) for v in ss.generate_state(3)
                )
                onset = base_cfg.contact_onset_s + onset_jitter_s * (
                    2.0 * onset_u32 / 2**32 - 1.0
                )
                onset = max(0.5, onset)
                # Pad compliance differs a little every time the obstacle
                # is placed, so the strain-per-newton gain varies by trial.
                gain = base_cfg.perturb_gain_microstrain_per_N * (
                    1.0 + gain_jitter * (2.0 * gain_u32 / 2**32 - 1.0)
                )
                cfg = replace(
                    base_cfg,
                    side=side,
                    contact_s_mm=s_c,
                    test_id=f"{side.value}_{loc_idx}",
                    contact_onset_s=onset,
                    perturb_gain_microstrain_per_N=gain,
                    seed=trial_seed,
                )
                trials.append(simulate_trial(cfg))
    for i in range(1, n_no_contact + 1):
        ss = np.random.SeedSequence((seed, 99, i))
        trial_seed = int(ss.generate_state(1)[0])
        cfg = replace(
            base_cfg,
            side=Side.CONVEX if i % 2 else Side.CONCAVE,
            contact_s_mm=None,
            test_id=f"nc_{i}",
            seed=trial_seed,
        )
        trials.append(simulate_trial(cfg))
    return trials
