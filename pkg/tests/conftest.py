"""Shared fixtures: grids, fast synthetic configs, and cached datasets."""
from __future__ import annotations

import numpy as np
import pytest

from fibercontact.config import RunConfig
from fibercontact.core import ArcGrid, Side, StrainFrame, Trial
from fibercontact.forcenet import NetSpec
from fibercontact.synth import SynthConfig, make_benchmark_dataset, simulate_trial


@pytest.fixture(scope="session")
def grid() -> ArcGrid:
    return ArcGrid()


@pytest.fixture(scope="session")
def small_grid() -> ArcGrid:
    return ArcGrid(length_mm=40.0, n_nodes=21, node_pitch_mm=2.0, n_segments=8)


# A network sized for the 21-node small grid; three cheap conv blocks.
SMALL_NET = NetSpec(
    n_nodes=21,
    n_out=8,
    conv_channels=(4, 4, 8),
    kernel_sizes=(3, 3, 3),
    paddings=(1, 1, 1),
    dilations=(1, 1, 1),
)


def fast_cfg(grid: ArcGrid, **kw) -> SynthConfig:
    """Short trials (about 30 frames) for unit tests."""
    defaults = dict(
        grid=grid,
        contact_s_mm=grid.length_mm / 2,
        contact_onset_s=1.0,
        force_ramp_N_per_s=0.2,
        curvature_gain=15.0,
        perturb_gain_microstrain_per_N=3200.0,
    )
    defaults.update(kw)
    return SynthConfig(**defaults)


@pytest.fixture(scope="session")
def tiny_bench(small_grid) -> list[Trial]:
    """2 locations x 2 sides x 2 repeats on the small grid, short trials."""
    base = fast_cfg(small_grid, contact_s_mm=None)
    return make_benchmark_dataset(
        base, seed=7, locations_mm=[10.0, 30.0], n_repeats=2
    )


@pytest.fixture(scope="session")
def bench_full(grid) -> list[Trial]:
    """The default 48-trial benchmark, exactly as the pipeline generates it."""
    cfg = RunConfig()
    base = cfg.synth.to_synth_config(grid)
    return make_benchmark_dataset(
        base,
        seed=cfg.seed,
        n_repeats=cfg.synth.n_repeats,
        n_no_contact=cfg.synth.n_no_contact,
        onset_jitter_s=cfg.synth.onset_jitter_s,
        gain_jitter=cfg.synth.gain_jitter,
    )


def make_trial(
    grid: ArcGrid,
    n_frames: int = 5,
    test_id: str = "cv_1",
    side: Side = Side.CONVEX,
    contact_s_mm: float | None = None,
    seed: int = 0,
) -> Trial:
    """Hand-built trial with arbitrary strain, for I/O and plumbing tests."""
    rng = np.random.default_rng(seed)
    frames = [
        StrainFrame(
            t_s=0.05 * k,
            strain=rng.normal(size=grid.n_nodes),
            motor_pos=0.1 * k,
            force_N=0.01 * k,
        )
        for k in range(n_frames)
    ]
    return Trial(
        test_id=test_id,
        side=side,
        grid=grid,
        frames=frames,
        gt_contact_s_mm=contact_s_mm,
        gt_force_N=np.array([0.01 * k for k in range(n_frames)]),
    )
