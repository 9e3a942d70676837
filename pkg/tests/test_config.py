"""Config defaults, the flat file format, and override plumbing."""
from __future__ import annotations

from pathlib import Path

import pytest

from fibercontact.config import (
    DetectorSection,
    RunConfig,
    SynthSection,
    TrainSection,
    apply_overrides,
    dump_config,
    load_config,
    parse_config,
)
from fibercontact.core import ArcGrid, ConfigError, Side


class TestDefaults:
    def test_benchmark_generator_defaults(self):
        s = SynthSection()
        assert s.curvature_gain == 15.0
        assert s.perturb_gain_microstrain_per_N == 3200.0
        assert s.noise_std_microstrain == 2.0
        assert s.force_ramp_N_per_s == 0.02
        assert s.max_force_N == 0.10
        assert s.frame_rate_hz == 20.0
        assert s.onset_jitter_s == 0.75
        assert s.gain_jitter == 0.0
        assert s.n_repeats == 3

    def test_pipeline_training_defaults(self):
        t = TrainSection()
        assert t.n_epochs == 110
        assert t.stride == 8
        assert t.sigma_mm == 5.3125
        assert t.dropout == 0.1

    def test_detector_defaults_match_model_params(self):
        d = DetectorSection()
        p = d.to_params()
        assert (p.n_trees, p.max_depth, p.learning_rate) == (300, 3, 0.1)
        assert (p.min_samples_leaf, p.subsample, p.l2_damping) == (5, 1.0, 1.0)

    def test_grid_default(self):
        assert RunConfig().grid == ArcGrid()

    def test_to_synth_config_carries_fields(self, grid):
        s = SynthSection(curvature_gain=99.0)
        cfg = s.to_synth_config(grid, seed=5)
        assert cfg.curvature_gain == 99.0
        assert cfg.seed == 5
        assert cfg.grid is grid
        assert cfg.side is Side.CONVEX
        assert cfg.contact_s_mm is None


class TestParse:
    def test_values_comments_and_blanks(self):
        cfg = parse_config(
            """
            # a comment
            seed = 9

            synth.curvature_gain = 40.5
            detector.n_trees = 11
            """
        )
        assert cfg.seed == 9
        assert cfg.synth.curvature_gain == 40.5
        assert cfg.detector.n_trees == 11

    def test_grid_keys(self):
        cfg = parse_config("grid.n_nodes = 21\ngrid.length_mm = 40.0\n"
                           "grid.node_pitch_mm = 2.0\ngrid.n_segments = 8\n")
        assert cfg.grid == ArcGrid(40.0, 21, 2.0, 8)

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigError, match="line 2.*synth.bogus"):
            parse_config("seed = 1\nsynth.bogus = 3\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown config section 'nope'"):
            parse_config("nope.thing = 1")

    def test_top_level_key_must_be_seed(self):
        with pytest.raises(ConfigError, match="unknown config key 'stride'"):
            parse_config("stride = 4")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1: expected 'key = value'"):
            parse_config("just words")

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="bad value for detector.n_trees"):
            parse_config("detector.n_trees = many")

    def test_invalid_grid_geometry_becomes_config_error(self):
        with pytest.raises(ConfigError, match="grid.n_nodes"):
            parse_config("grid.n_nodes = 1")

    def test_base_config_is_extended_not_reset(self):
        base = parse_config("synth.curvature_gain = 40.0")
        cfg = parse_config("seed = 2", base=base)
        assert cfg.synth.curvature_gain == 40.0
        assert cfg.seed == 2


class TestRoundTrip:
    def test_dump_then_parse_reproduces_defaults(self):
        cfg = RunConfig()
        assert parse_config(dump_config(cfg)) == cfg

    def test_dump_then_parse_reproduces_modified(self):
        cfg = apply_overrides(
            RunConfig(),
            [
                "seed=17",
                "synth.noise_std_microstrain=0.125",
                "synth.perturb_gain_microstrain_per_N=3333.3",
                "train.n_epochs=7",
                "eval.proba_threshold=0.35",
            ],
        )
        assert parse_config(dump_config(cfg)) == cfg

    def test_shipped_default_file_matches_builtin_defaults(self):
        path = Path(__file__).resolve().parent.parent / "configs" / "default.cfg"
        assert load_config(path) == RunConfig()


class TestOverrides:
    def test_applies_in_order(self):
        cfg = apply_overrides(RunConfig(), ["seed=1", "seed=2"])
        assert cfg.seed == 2

    def test_rejects_missing_equals(self):
        with pytest.raises(ConfigError, match="not of the form"):
            apply_overrides(RunConfig(), ["seed:3"])

    def test_rejects_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            apply_overrides(RunConfig(), ["train.momentum=0.9"])

    def test_spaces_tolerated(self):
        cfg = apply_overrides(RunConfig(), [" train.stride = 4 "])
        assert cfg.train.stride == 4
