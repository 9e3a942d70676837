"""Generator semantics: strain model, termination, jitter, determinism."""
from __future__ import annotations

import numpy as np
import pytest

from fibercontact.core import Side
from fibercontact.features import label_contact
from fibercontact.synth import (
    DEFAULT_CONTACT_PAIR_SEGMENTS,
    DEFAULT_PAIR_OFFSET_MM,
    SynthConfig,
    baseline_strain,
    contact_perturbation,
    default_contact_locations_mm,
    make_benchmark_dataset,
    simulate_trial,
)

from conftest import fast_cfg


class TestBaseline:
    def test_half_sine_profile(self, grid):
        out = baseline_strain(grid, 10.0, Side.CONVEX, 0.5)
        s = grid.node_positions_mm()
        expect = 10.0 * np.sin(np.pi * s / 170.0) * 0.5
        assert np.array_equal(out, expect)

    def test_vanishes_at_the_ends(self, grid):
        out = baseline_strain(grid, 10.0, Side.CONVEX, 0.5)
        assert out[0] == 0.0
        assert abs(out[-1]) < 1e-12

    def test_sign_follows_side(self, grid):
        cv = baseline_strain(grid, 10.0, Side.CONVEX, 0.5)
        cc = baseline_strain(grid, 10.0, Side.CONCAVE, 0.5)
        assert np.all(cv[1:-1] > 0)
        assert np.array_equal(cc, -cv)


class TestPerturbation:
    def test_gaussian_bump_formula(self, grid):
        out = contact_perturbation(grid, 85.0, 0.05, Side.CONVEX, 8.0, 400.0)
        s = grid.node_positions_mm()
        expect = 400.0 * 0.05 * np.exp(-((s - 85.0) ** 2) / (2 * 64.0))
        assert np.array_equal(out, expect)

    def test_peaks_at_node_nearest_contact(self, grid):
        s = grid.node_positions_mm()
        for contact in (13.7, 85.0, 101.3, 166.2):
            out = contact_perturbation(grid, contact, 0.1, Side.CONVEX)
            assert np.argmax(out) == np.argmin(np.abs(s - contact))

    def test_positive_on_both_sides(self, grid):
        cv = contact_perturbation(grid, 60.0, 0.1, Side.CONVEX)
        cc = contact_perturbation(grid, 60.0, 0.1, Side.CONCAVE)
        assert np.all(cv > 0)
        assert np.all(cc > 0)

    def test_concave_contrast_scales_exactly(self, grid):
        cv = contact_perturbation(grid, 60.0, 0.1, Side.CONVEX)
        cc = contact_perturbation(grid, 60.0, 0.1, Side.CONCAVE)
        assert np.allclose(cc, 0.6 * cv, rtol=1e-12, atol=0.0)

    def test_linear_in_force(self, grid):
        one = contact_perturbation(grid, 42.0, 0.04, Side.CONVEX)
        two = contact_perturbation(grid, 42.0, 0.08, Side.CONVEX)
        assert np.allclose(two, 2.0 * one, rtol=1e-12)

    def test_zero_force_is_zero(self, grid):
        assert np.all(contact_perturbation(grid, 42.0, 0.0, Side.CONVEX) == 0.0)

    def test_rejects_bad_inputs(self, grid):
        with pytest.raises(ValueError, match="contact_s_mm"):
            contact_perturbation(grid, -1.0, 0.1, Side.CONVEX)
        with pytest.raises(ValueError, match="contact_s_mm"):
            contact_perturbation(grid, 171.0, 0.1, Side.CONVEX)
        with pytest.raises(ValueError, match="force_N"):
            contact_perturbation(grid, 10.0, -0.1, Side.CONVEX)


class TestSimulateTrial:
    def test_noiseless_strain_is_exact_superposition(self, small_grid):
        cfg = fast_cfg(small_grid, noise_std_microstrain=0.0)
        trial = simulate_trial(cfg)
        for k, frame in enumerate(trial.frames):
            base = baseline_strain(
                small_grid,
                cfg.curvature_gain * frame.motor_pos,
                cfg.side,
                cfg.fiber_offset_mm,
            )
            bump = contact_perturbation(
                small_grid,
                cfg.contact_s_mm,
                trial.gt_force_N[k],
                cfg.side,
                cfg.perturb_width_mm,
                cfg.perturb_gain_microstrain_per_N,
                cfg.concave_contrast,
            )
            assert np.array_equal(frame.strain, base + bump)

    def test_terminates_at_first_max_force_frame(self, small_grid):
        trial = simulate_trial(fast_cfg(small_grid))
        f = trial.gt_force_N
        assert f[-1] >= 0.10
        assert np.all(f[:-1] < 0.10)

    def test_force_ramp_timing(self, small_grid):
        cfg = fast_cfg(small_grid)
        trial = simulate_trial(cfg)
        t = trial.times()
        expect = np.maximum(0.0, cfg.force_ramp_N_per_s * (t - cfg.contact_onset_s))
        assert np.allclose(trial.gt_force_N, expect)

    def test_frame_lattice_and_motor(self, small_grid):
        cfg = fast_cfg(small_grid, motor_rate_per_s=0.5)
        trial = simulate_trial(cfg)
        t = trial.times()
        assert np.array_equal(t, np.arange(trial.n_frames) / 20.0)
        assert np.array_equal(trial.motor_positions(), 0.5 * t)

    def test_measured_force_equals_ground_truth(self, small_grid):
        trial = simulate_trial(fast_cfg(small_grid))
        assert np.array_equal(trial.forces(), trial.gt_force_N)

    def test_no_contact_trial(self, small_grid):
        cfg = fast_cfg(small_grid, contact_s_mm=None)
        trial = simulate_trial(cfg)
        assert trial.gt_contact_s_mm is None
        assert np.all(trial.gt_force_N == 0.0)
        assert np.all(label_contact(trial.gt_force_N) == 0)

    def test_deterministic_given_seed(self, small_grid):
        cfg = fast_cfg(small_grid, seed=123)
        assert simulate_trial(cfg) == simulate_trial(cfg)
        other = simulate_trial(fast_cfg(small_grid, seed=124))
        assert simulate_trial(cfg) != other

    def test_noise_level_matches_config(self, small_grid):
        # flat arm, no contact: frames are pure sensor noise; the slow ramp
        # keeps the run long enough for a stable estimate
        cfg = fast_cfg(
            small_grid,
            contact_s_mm=None,
            curvature_gain=0.0,
            noise_std_microstrain=2.0,
            force_ramp_N_per_s=0.02,
        )
        trial = simulate_trial(cfg)
        noise = trial.strain_matrix().ravel()
        assert len(noise) >= 1000
        assert abs(noise.std() - 2.0) < 0.4
        assert abs(noise.mean()) < 0.3

    def test_config_validation(self, small_grid):
        with pytest.raises(ValueError, match="contact_s_mm"):
            fast_cfg(small_grid, contact_s_mm=50.0)
        with pytest.raises(ValueError, match="frame_rate"):
            fast_cfg(small_grid, frame_rate_hz=0.0)
        with pytest.raises(ValueError, match="noise_std"):
            fast_cfg(small_grid, noise_std_microstrain=-1.0)
        with pytest.raises(ValueError, match="fiber_offset"):
            fast_cfg(small_grid, fiber_offset_mm=0.0)
        with pytest.raises(ValueError, match="force_ramp"):
            fast_cfg(small_grid, force_ramp_N_per_s=0.0)
        with pytest.raises(ValueError, match="max_force"):
            fast_cfg(small_grid, max_force_N=-0.1)
        with pytest.raises(ValueError, match="contact_onset"):
            fast_cfg(small_grid, contact_onset_s=-1.0)


class TestBenchmark:
    def test_composition(self, bench_full):
        assert len(bench_full) == 48
        ids = [t.test_id for t in bench_full]
        for side in ("cv", "cc"):
            for j in range(1, 9):
                assert ids.count(f"{side}_{j}") == 3

    def test_default_locations_pair_up_within_segments(self, grid):
        locs = default_contact_locations_mm(grid)
        d = grid.segment_len_mm
        expect = []
        for j in DEFAULT_CONTACT_PAIR_SEGMENTS:
            center = (j + 0.5) * d
            expect += [center - DEFAULT_PAIR_OFFSET_MM, center + DEFAULT_PAIR_OFFSET_MM]
        assert locs == expect
        # pair members share a segment, so holding one id out still leaves
        # trials that excite the same segment in the training split
        for lo, hi in zip(locs[0::2], locs[1::2]):
            assert int(lo // d) == int(hi // d)
        assert all(0.0 < s < grid.length_mm for s in locs)

    def test_ground_truth_location_is_exact(self, bench_full, grid):
        locs = default_contact_locations_mm(grid)
        for trial in bench_full:
            j = int(trial.test_id.split("_")[1]) - 1
            assert trial.gt_contact_s_mm == locs[j]

    def test_every_trial_terminates(self, bench_full):
        for trial in bench_full:
            f = trial.gt_force_N
            assert f[-1] >= 0.10, trial.test_id
            assert np.all(f[:-1] < 0.10), trial.test_id

    def test_contact_frame_mean_strain_sign(self, bench_full):
        # convex bending reads tensile overall, concave compressive, even
        # with the contact bump superposed
        for trial in bench_full:
            contact = trial.gt_force_N >= 0.01
            means = trial.strain_matrix()[contact].mean(axis=1)
            if trial.side is Side.CONVEX:
                assert np.all(means > 0), trial.test_id
            else:
                assert np.all(means < 0), trial.test_id

    def test_regeneration_is_identical(self, small_grid):
        base = fast_cfg(small_grid, contact_s_mm=None)
        kw = dict(locations_mm=[10.0, 30.0], n_repeats=2, n_no_contact=1)
        a = make_benchmark_dataset(base, seed=5, **kw)
        b = make_benchmark_dataset(base, seed=5, **kw)
        assert a == b

    def test_different_seeds_differ(self, small_grid):
        base = fast_cfg(small_grid, contact_s_mm=None)
        a = make_benchmark_dataset(base, seed=5, locations_mm=[10.0], n_repeats=1)
        b = make_benchmark_dataset(base, seed=6, locations_mm=[10.0], n_repeats=1)
        assert a != b

    def test_onset_jitter_varies_repeats(self, small_grid):
        base = fast_cfg(small_grid, contact_s_mm=None)
        trials = make_benchmark_dataset(
            base, seed=5, locations_mm=[10.0], n_repeats=3, onset_jitter_s=0.3
        )
        onsets = set()
        for t in [t for t in trials if t.test_id == "cv_1"]:
            first = np.nonzero(t.gt_force_N > 0)[0][0]
            onsets.add(first)
        # 0.3 s of jitter spans several 50 ms frames
        assert len(onsets) > 1

    def test_gain_jitter_varies_bump_height(self, small_grid):
        base = fast_cfg(small_grid, contact_s_mm=None, noise_std_microstrain=0.0)
        trials = make_benchmark_dataset(
            base, seed=5, locations_mm=[20.0], n_repeats=3, gain_jitter=0.2
        )
        ratios = set()
        for t in [t for t in trials if t.test_id == "cv_1"]:
            resid = t.frames[-1].strain - baseline_strain(
                small_grid,
                base.curvature_gain * t.frames[-1].motor_pos,
                t.side,
                base.fiber_offset_mm,
            )
            ratios.add(round(float(resid.max() / t.gt_force_N[-1]), 6))
        assert len(ratios) == 3

    def test_zero_jitter_disables_variation(self, small_grid):
        base = fast_cfg(small_grid, contact_s_mm=None, noise_std_microstrain=0.0)
        trials = make_benchmark_dataset(
            base, seed=5, locations_mm=[20.0], n_repeats=2,
            onset_jitter_s=0.0, gain_jitter=0.0,
        )
        a, b = [t for t in trials if t.test_id == "cv_1"]
        assert np.array_equal(a.gt_force_N, b.gt_force_N)

    def test_no_contact_trials(self, small_grid):
        base = fast_cfg(small_grid, contact_s_mm=None)
        trials = make_benchmark_dataset(
            base, seed=5, locations_mm=[10.0], n_repeats=1, n_no_contact=2
        )
        nc = [t for t in trials if t.test_id.startswith("nc_")]
        assert [t.test_id for t in nc] == ["nc_1", "nc_2"]
        assert {t.side for t in nc} == {Side.CONVEX, Side.CONCAVE}
        for t in nc:
            assert t.gt_contact_s_mm is None
            assert np.all(t.gt_force_N == 0.0)
