"""Run configuration: typed defaults plus a flat key = value file format.

Config files hold ``section.key = value`` lines ('#' comments and blank
lines allowed). Every key must name a known field; values are coerced to
the field's type. dump_config writes floats in round-trip form, so
parse(dump(cfg)) reproduces cfg exactly.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, replace
from pathlib import Path

from .core import ArcGrid, ConfigError
from .forcenet import TrainOptions
from .gbdt import GbdtParams
from .synth import SynthConfig


@dataclass(frozen=True)
class SynthSection:
    fiber_offset_mm: float = 0.5
    curvature_gain: float = 15.0
    motor_rate_per_s: float = 1.0
    noise_std_microstrain: float = 2.0
    frame_rate_hz: float = 20.0
    max_force_N: float = 0.10
    force_ramp_N_per_s: float = 0.02
    contact_onset_s: float = 5.0
    perturb_width_mm: float = 8.0
    perturb_gain_microstrain_per_N: float = 3200.0
    concave_contrast: float = 0.6
    n_repeats: int = 3
    n_no_contact: int = 0
    onset_jitter_s: float = 0.75
    gain_jitter: float = 0.0

    def to_synth_config(self, grid: ArcGrid, seed: int = 0) -> SynthConfig:
        return SynthConfig(
            grid=grid,
            fiber_offset_mm=self.fiber_offset_mm,
            curvature_gain=self.curvature_gain,
            motor_rate_per_s=self.motor_rate_per_s,
            noise_std_microstrain=self.noise_std_microstrain,
            frame_rate_hz=self.frame_rate_hz,
            max_force_N=self.max_force_N,
            force_ramp_N_per_s=self.force_ramp_N_per_s,
            contact_onset_s=self.contact_onset_s,
            perturb_width_mm=self.perturb_width_mm,
            perturb_gain_microstrain_per_N=self.perturb_gain_microstrain_per_N,
            concave_contrast=self.concave_contrast,
            seed=seed,
        )


@dataclass(frozen=True)
class FeatureSection:
    k_bins: int = 32
    f_thresh_N: float = 0.01


@dataclass(frozen=True)
class DetectorSection:
    n_trees: int = 300
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    subsample: float = 1.0
    l2_damping: float = 1.0

    def to_params(self) -> GbdtParams:
        return GbdtParams(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            learning_rate=self.learning_rate,
            min_samples_leaf=self.min_samples_leaf,
            subsample=self.subsample,
            l2_damping=self.l2_damping,
        )


@dataclass(frozen=True)
class TrainSection:
    """Stage-two training budget.

    The pipeline default (110 epochs on every 8th contact frame) is sized
    so a full 16-fold evaluation fits a single-core time budget; the
    library default in TrainOptions is the larger standalone budget.
    """

    learning_rate: float = 1e-3
    batch_size: int = 64
    n_epochs: int = 110
    sigma_mm: float = 2 * 170.0 / 64
    stride: int = 8
    dropout: float = 0.1
    weight_decay: float = 0.0

    def to_options(self) -> TrainOptions:
        return TrainOptions(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            n_epochs=self.n_epochs,
            weight_decay=self.weight_decay,
        )


@dataclass(frozen=True)
class EvalSection:
    proba_threshold: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    grid: ArcGrid = ArcGrid()
    synth: SynthSection = SynthSection()
    features: FeatureSection = FeatureSection()
    detector: DetectorSection = DetectorSection()
    train: TrainSection = TrainSection()
    eval: EvalSection = EvalSection()


_SECTIONS = ("grid", "synth", "features", "detector", "train", "eval")


def _coerce(raw: str, target_type: type, key: str):
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is str:
            return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
    raise ConfigError(f"unsupported type for {key}: {target_type}")


def _set_key(cfg: RunConfig, dotted: str, raw: str) -> RunConfig:
    if dotted == "seed":
        return replace(cfg, seed=_coerce(raw, int, dotted))
    if "." not in dotted:
        raise ConfigError(f"unknown config key {dotted!r}")
    section_name, field_name = dotted.split(".", 1)
    if section_name not in _SECTIONS:
        raise ConfigError(f"unknown config section {section_name!r}")
    section = getattr(cfg, section_name)
    fields = {f.name: f.type for f in dataclasses.fields(section)}
    if field_name not in fields:
        raise ConfigError(f"unknown config key {dotted!r}")
    current = getattr(section, field_name)
    value = _coerce(raw, type(current), dotted)
    try:
        new_section = replace(section, **{field_name: value})
    except ValueError as exc:
        raise ConfigError(f"invalid {dotted} = {raw}: {exc}") from exc
    return replace(cfg, **{section_name: new_section})


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        try:
            cfg = _set_key(cfg, key, raw)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return cfg


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    return parse_config(Path(path).read_text(), base=base)


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply 'section.key=value' strings, as given on the command line."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        cfg = _set_key(cfg, key, raw)
    return cfg


def _fmt_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """Every key, one per line, in parseable form."""
    lines = [f"seed = {cfg.seed}"]
    for section_name in _SECTIONS:
        section = getattr(cfg, section_name)
        for f in dataclasses.fields(section):
            value = getattr(section, f.name)
            lines.append(f"{section_name}.{f.name} = {_fmt_value(value)}")
    return "\n".join(lines) + "\n"
