"""Trial serialization and stream replay.

One trial per CSV file: '#'-prefixed key=value header lines, a column-name
row, then one row per frame. Reals are rendered in shortest round-trip
decimal form, so write -> read is bit-exact. The layout is documented in
docs/format.md.
"""
from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .core import ArcGrid, Side, StrainFrame, Trial, TrialFormatError

FORMAT_TAG = "trial-format v1"
FIXED_COLUMNS = ("t_s", "motor_pos", "force_N", "gt_force_N")


def _fmt(x: float) -> str:
    return repr(float(x))


def _strain_columns(n_nodes: int) -> list[str]:
    width = max(3, len(str(n_nodes - 1)))
    return [f"eps_{i:0{width}d}" for i in range(n_nodes)]


def write_trial(trial: Trial, path: str | Path) -> None:
    """Write one trial to ``path`` in the canonical CSV layout."""
    g = trial.grid
    lines = [f"# {FORMAT_TAG}"]
    lines.append(f"# test_id={trial.test_id}")
    lines.append(f"# side={trial.side.value}")
    lines.append(f"# length_mm={_fmt(g.length_mm)}")
    lines.append(f"# n_nodes={g.n_nodes}")
    lines.append(f"# node_pitch_mm={_fmt(g.node_pitch_mm)}")
    lines.append(f"# n_segments={g.n_segments}")
    if trial.gt_contact_s_mm is not None:
        lines.append(f"# gt_contact_s_mm={_fmt(trial.gt_contact_s_mm)}")
    lines.append(",".join(FIXED_COLUMNS + tuple(_strain_columns(g.n_nodes))))
    for k, frame in enumerate(trial.frames):
        fields = [
            _fmt(frame.t_s),
            _fmt(frame.motor_pos),
            _fmt(frame.force_N),
            _fmt(trial.gt_force_N[k]),
        ]
        fields.extend(_fmt(v) for v in frame.strain)
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(lines: list[str]) -> tuple[dict[str, str], int]:
    """Return (header key/values, index of the column-name row)."""
    if not lines or lines[0].strip() != f"# {FORMAT_TAG}":
        raise TrialFormatError(f"line 1: missing '# {FORMAT_TAG}' marker")
    header: dict[str, str] = {}
    for i, line in enumerate(lines[1:], start=1):
        if not line.startswith("#"):
            return header, i
        body = line[1:].strip()
        if "=" not in body:
            raise TrialFormatError(f"line {i + 1}: malformed header {line!r}")
        key, value = body.split("=", 1)
        if key in header:
            raise TrialFormatError(f"line {i + 1}: duplicate header key {key!r}")
        header[key] = value
    raise TrialFormatError("missing column-name row")


_REQUIRED_KEYS = ("test_id", "side", "length_mm", "n_nodes", "node_pitch_mm", "n_segments")
_OPTIONAL_KEYS = ("gt_contact_s_mm",)


def read_trial(path: str | Path) -> Trial:
    """Parse a trial file; validates schema, column count, and timestamps."""
    text = Path(path).read_text()
    lines = text.splitlines()
    header, col_row = _parse_header(lines)

    for key in _REQUIRED_KEYS:
        if key not in header:
            raise TrialFormatError(f"missing header key {key!r}")
    for key in header:
        if key not in _REQUIRED_KEYS + _OPTIONAL_KEYS:
            raise TrialFormatError(f"unknown header key {key!r}")

    try:
        grid = ArcGrid(
            length_mm=float(header["length_mm"]),
            n_nodes=int(header["n_nodes"]),
            node_pitch_mm=float(header["node_pitch_mm"]),
            n_segments=int(header["n_segments"]),
        )
        side = Side.from_str(header["side"])
        gt_contact = (
            float(header["gt_contact_s_mm"])
            if "gt_contact_s_mm" in header
            else None
        )
    except ValueError as exc:
        raise TrialFormatError(f"invalid header value: {exc}") from exc

    n_columns = len(FIXED_COLUMNS) + grid.n_nodes
    expected_names = ",".join(FIXED_COLUMNS + tuple(_strain_columns(grid.n_nodes)))
    if lines[col_row].strip() != expected_names:
        raise TrialFormatError(
            f"line {col_row + 1}: column names do not match the "
            f"{n_columns}-column schema"
        )

    frames: list[StrainFrame] = []
    gt_force: list[float] = []
    prev_t = -np.inf
    for i, line in enumerate(lines[col_row + 1 :], start=col_row + 2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != n_columns:
            raise TrialFormatError(
                f"row {i}: expected {n_columns} columns, got {len(fields)}"
            )
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise TrialFormatError(f"row {i}: non-numeric field: {exc}") from exc
        t_s = values[0]
        if t_s < prev_t:
            raise TrialFormatError(
                f"row {i}: non-monotone timestamp {t_s} after {prev_t}"
            )
        prev_t = t_s
        frames.append(
            StrainFrame(
                t_s=t_s,
                strain=np.array(values[4:]),
                motor_pos=values[1],
                force_N=values[2],
            )
        )
        gt_force.append(values[3])

    if not frames:
        warnings.warn(f"{path}: trial has no data rows", stacklevel=2)
    return Trial(
        test_id=header["test_id"],
        side=side,
        grid=grid,
        frames=frames,
        gt_contact_s_mm=gt_contact,
        gt_force_N=np.array(gt_force),
    )


def read_trial_dir(path: str | Path) -> list[Trial]:
    """Read every *.csv trial in a directory, sorted by filename."""
    files = sorted(Path(path).glob("*.csv"))
    if not files:
        raise TrialFormatError(f"no trial files (*.csv) in {path}")
    return [read_trial(f) for f in files]


def _replay_lattice(
    trial: Trial,
    source_rate_hz: float,
    log_rate_hz: float,
    stop_force_N: float | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Log-tick timestamps and the source times they sample.

    Logger ticks sit on the log-rate lattice; each reads the newest source
    frame emitted at or before it. Truncated after the first tick whose
    force reaches stop_force_N.
    """
    t = trial.times()
    duration = t[-1]
    n_ticks = int(np.floor(duration * log_rate_hz + 1e-9)) + 1
    ticks = np.arange(n_ticks) / log_rate_hz
    # Snap floor() against 1-ulp undershoot so exact rate multiples pick the
    # on-tick source sample.
    x = ticks * source_rate_hz
    src_idx = np.floor(x + 1e-9 + np.abs(x) * 1e-12)
    u = np.minimum(src_idx / source_rate_hz, duration)

    if stop_force_N is not None:
        force = np.interp(u, t, trial.forces())
        over = np.nonzero(force >= stop_force_N)[0]
        if over.size:
            ticks, u = ticks[: over[0] + 1], u[: over[0] + 1]
    return ticks, u


def replay(
    trial: Trial,
    source_rate_hz: float,
    log_rate_hz: float,
    stop_force_N: float | None = 0.10,
) -> list[StrainFrame]:
    """Emulate newest-only logging of a high-rate source.

    A source emits frames at ``source_rate_hz`` (linearly interpolated from
    the trial); a logger samples at ``log_rate_hz`` and always takes the
    most recent source frame. Output timestamps lie on the log-rate
    lattice. Stops at the first frame with force >= ``stop_force_N``.
    """
    if not source_rate_hz >= log_rate_hz > 0:
        raise ValueError(
            f"need source_rate >= log_rate > 0, got {source_rate_hz}, {log_rate_hz}"
        )
    if not trial.frames:
        return []
    ticks, u = _replay_lattice(trial, source_rate_hz, log_rate_hz, stop_force_N)
    t = trial.times()
    motor = np.interp(u, t, trial.motor_positions())
    force = np.interp(u, t, trial.forces())

    strain_in = trial.strain_matrix()
    strain = np.empty((len(u), trial.grid.n_nodes))
    for node in range(trial.grid.n_nodes):
        strain[:, node] = np.interp(u, t, strain_in[:, node])

    return [
        StrainFrame(
            t_s=ticks[k], strain=strain[k], motor_pos=motor[k], force_N=force[k]
        )
        for k in range(len(u))
    ]


def replay_trial(
    trial: Trial,
    source_rate_hz: float,
    log_rate_hz: float,
    stop_force_N: float | None = 0.10,
) -> Trial:
    """replay(), repackaged as a Trial with ground truth carried along."""
    frames = replay(trial, source_rate_hz, log_rate_hz, stop_force_N)
    if frames:
        _, u = _replay_lattice(trial, source_rate_hz, log_rate_hz, stop_force_N)
        gt_force = np.interp(u, trial.times(), trial.gt_force_N)
    else:
        gt_force = np.zeros(0)
    return Trial(
        test_id=trial.test_id,
        side=trial.side,
        grid=trial.grid,
        frames=frames,
        gt_contact_s_mm=trial.gt_contact_s_mm,
        gt_force_N=gt_force,
    )
