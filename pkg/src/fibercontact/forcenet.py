"""Force-distribution network: strain profile -> per-segment force bins.

A small 1-D convolutional encoder reads the full strain profile, a FiLM
generator conditions the deepest feature map on the motor position, and a
dense head emits one value per arc segment. The regression target is a
Gaussian bump centered on the contact segment and scaled by the applied
force, so a single argmax/max decode yields both location and magnitude.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .core import ArcGrid, TrainingDivergedError, Trial

FORMAT_TAG = "forcenet-checkpoint-v1"

torch.set_num_threads(1)


@dataclass(frozen=True)
class NetSpec:
    """Architecture hyperparameters. Defaults fit the 263-node profile."""

    n_nodes: int = 263
    n_out: int = 64
    conv_channels: tuple[int, ...] = (16, 32, 64)
    kernel_sizes: tuple[int, ...] = (7, 7, 3)
    paddings: tuple[int, ...] = (3, 3, 1)
    dilations: tuple[int, ...] = (2, 2, 1)
    pool_size: int = 2
    dropout: float = 0.1
    n_scalar: int = 1
    film_hidden: int = 128
    head_hidden: tuple[int, ...] = (128, 64)

    def __post_init__(self) -> None:
        n = len(self.conv_channels)
        for name in ("kernel_sizes", "paddings", "dilations"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have {n} entries")
        self.intermediate_lengths()

    def intermediate_lengths(self) -> list[int]:
        """Sequence lengths after each conv and each pool, in order."""
        lengths = []
        length = self.n_nodes
        for k, p, d in zip(self.kernel_sizes, self.paddings, self.dilations):
            length = length + 2 * p - d * (k - 1)
            lengths.append(length)
            length = length // self.pool_size
            lengths.append(length)
            if length < 1:
                raise ValueError(
                    f"profile of {self.n_nodes} nodes collapses to zero length"
                )
        return lengths

    @property
    def flat_dim(self) -> int:
        return self.conv_channels[-1] * self.intermediate_lengths()[-1]


class ForceDistributionNet(nn.Module):
    def __init__(self, spec: NetSpec):
        super().__init__()
        self.spec = spec
        blocks = []
        in_ch = 1
        for out_ch, k, p, d in zip(
            spec.conv_channels, spec.kernel_sizes, spec.paddings, spec.dilations
        ):
            blocks.append(
                nn.Sequential(
                    nn.Conv1d(in_ch, out_ch, k, padding=p, dilation=d),
                    nn.BatchNorm1d(out_ch),
                    nn.ReLU(),
                    nn.MaxPool1d(spec.pool_size, spec.pool_size),
                    nn.Dropout(spec.dropout),
                )
            )
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)

        c_last = spec.conv_channels[-1]
        self.film = nn.Sequential(
            nn.Linear(spec.n_scalar, spec.film_hidden),
            nn.ReLU(),
            nn.Linear(spec.film_hidden, 2 * c_last),
        )
        # Start as the identity modulation: gamma = 1, beta = 0.
        last = self.film[-1]
        nn.init.zeros_(last.weight)
        with torch.no_grad():
            last.bias.copy_(
                torch.cat([torch.ones(c_last), torch.zeros(c_last)])
            )

        head = []
        dim = spec.flat_dim
        for hidden in spec.head_hidden:
            head.extend([nn.Linear(dim, hidden), nn.ReLU()])
            dim = hidden
        head.append(nn.Linear(dim, spec.n_out))
        self.head = nn.Sequential(*head)

        self.register_buffer("strain_mean", torch.zeros(spec.n_nodes))
        self.register_buffer("strain_std", torch.ones(spec.n_nodes))
        self.register_buffer("scalar_mean", torch.zeros(spec.n_scalar))
        self.register_buffer("scalar_std", torch.ones(spec.n_scalar))

    def set_normalization(
        self, strain: np.ndarray, scalars: np.ndarray, floor: float = 1e-8
    ) -> None:
        """Freeze input standardization statistics from training data."""
        dtype = self.strain_mean.dtype
        self.strain_mean.copy_(torch.as_tensor(strain.mean(axis=0), dtype=dtype))
        self.strain_std.copy_(
            torch.as_tensor(np.maximum(strain.std(axis=0), floor), dtype=dtype)
        )
        self.scalar_mean.copy_(torch.as_tensor(scalars.mean(axis=0), dtype=dtype))
        self.scalar_std.copy_(
            torch.as_tensor(np.maximum(scalars.std(axis=0), floor), dtype=dtype)
        )

    def forward(self, strain: torch.Tensor, scalars: torch.Tensor) -> torch.Tensor:
        if strain.shape[-1] != self.spec.n_nodes:
            raise ValueError(
                f"expected {self.spec.n_nodes} strain nodes, got {strain.shape[-1]}"
            )
        x = (strain - self.strain_mean) / self.strain_std
        x = x.unsqueeze(1)
        for block in self.blocks:
            x = block(x)
        cond = (scalars - self.scalar_mean) / self.scalar_std
        gamma_beta = self.film(cond)
        gamma, beta = gamma_beta.chunk(2, dim=1)
        x = gamma.unsqueeze(-1) * x + beta.unsqueeze(-1)
        return self.head(x.flatten(1))


def build_network(spec: NetSpec | None = None, seed: int = 0) -> ForceDistributionNet:
    spec = spec or NetSpec()
    torch.manual_seed(seed)
    return ForceDistributionNet(spec)


def encode_targets(
    grid: ArcGrid,
    contact_s_mm: np.ndarray | float,
    force_N: np.ndarray | float,
    sigma_mm: float | None = None,
) -> np.ndarray:
    """Force-scaled Gaussian over segment centers.

    sigma defaults to one segment length. Peak value equals the force, so
    max/argmax decoding inverts the encoding when the contact sits at a
    segment center.
    """
    if sigma_mm is None:
        sigma_mm = grid.segment_len_mm
    if sigma_mm <= 0:
        raise ValueError(f"sigma_mm must be > 0, got {sigma_mm}")
    s = np.atleast_1d(np.asarray(contact_s_mm, dtype=float))
    f = np.atleast_1d(np.asarray(force_N, dtype=float))
    if s.shape != f.shape:
        raise ValueError(f"contact/force shapes differ: {s.shape} vs {f.shape}")
    centers = grid.segment_centers_mm()
    out = f[:, None] * np.exp(
        -((centers[None, :] - s[:, None]) ** 2) / (2.0 * sigma_mm**2)
    )
    if np.isscalar(contact_s_mm) or np.ndim(contact_s_mm) == 0:
        return out[0]
    return out


def decode_distribution(
    dist: np.ndarray, grid: ArcGrid
) -> tuple[np.ndarray | float, np.ndarray | float, np.ndarray | int]:
    """Invert the target encoding: (force, arc position, segment index).

    Force is the peak value, the segment is the argmax bin (lowest index
    on ties), and the position is that segment's center.
    """
    dist = np.asarray(dist, dtype=float)
    single = dist.ndim == 1
    d2 = dist[None, :] if single else dist
    if d2.shape[1] != grid.n_segments:
        raise ValueError(
            f"distribution has {d2.shape[1]} bins, grid has {grid.n_segments}"
        )
    seg = np.argmax(d2, axis=1)
    force = d2[np.arange(len(d2)), seg]
    s_mm = (seg + 0.5) * grid.segment_len_mm
    if single:
        return float(force[0]), float(s_mm[0]), int(seg[0])
    return force, s_mm, seg


def loss_mse(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return nn.functional.mse_loss(pred, target)


def build_localization_dataset(
    trials: list[Trial],
    sigma_mm: float | None = None,
    f_thresh: float = 0.01,
    stride: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Collect contact frames as (strain, motor, target, group) arrays.

    Only frames at or above the contact force threshold train this stage;
    trials without a ground-truth contact location contribute nothing.
    A stride > 1 keeps every stride-th eligible frame per trial.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    strain_rows, motor_rows, target_rows, groups = [], [], [], []
    for trial in trials:
        if trial.gt_contact_s_mm is None or trial.n_frames == 0:
            continue
        mask = trial.gt_force_N >= f_thresh
        if not mask.any():
            continue
        idx = np.nonzero(mask)[0][::stride]
        strain_rows.append(trial.strain_matrix()[idx])
        motor_rows.append(trial.motor_positions()[idx])
        targets = encode_targets(
            trial.grid,
            np.full(len(idx), trial.gt_contact_s_mm),
            trial.gt_force_N[idx],
            sigma_mm if sigma_mm is not None else trial.grid.segment_len_mm,
        )
        target_rows.append(targets)
        groups.extend([trial.test_id] * len(idx))
    if not strain_rows:
        raise ValueError("no contact frames with ground-truth location found")
    return (
        np.concatenate(strain_rows),
        np.concatenate(motor_rows),
        np.concatenate(target_rows),
        np.array(groups),
    )


@dataclass
class TrainOptions:
    learning_rate: float = 1e-3
    batch_size: int = 64
    n_epochs: int = 200
    weight_decay: float = 0.0


def train(
    model: ForceDistributionNet,
    strain: np.ndarray,
    scalars: np.ndarray,
    targets: np.ndarray,
    opts: TrainOptions | None = None,
    seed: int = 0,
) -> list[float]:
    """Adam on the bin-wise MSE. Returns the per-epoch mean loss curve.

    Normalization statistics are frozen from the given training arrays
    before the first step. A non-finite loss aborts immediately.
    """
    opts = opts or TrainOptions()
    if scalars.ndim == 1:
        scalars = scalars[:, None]
    n = len(strain)
    if n == 0:
        raise ValueError("empty training set")
    model.set_normalization(strain, scalars)

    dtype = next(model.parameters()).dtype
    xs = torch.as_tensor(strain, dtype=dtype)
    ss = torch.as_tensor(scalars, dtype=dtype)
    ts = torch.as_tensor(targets, dtype=dtype)

    gen = torch.Generator().manual_seed(seed)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=opts.learning_rate, weight_decay=opts.weight_decay
    )
    curve = []
    model.train()
    for epoch in range(opts.n_epochs):
        perm = torch.randperm(n, generator=gen)
        total = 0.0
        for start in range(0, n, opts.batch_size):
            idx = perm[start : start + opts.batch_size]
            optimizer.zero_grad()
            loss = loss_mse(model(xs[idx], ss[idx]), ts[idx])
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(idx)
        mean_loss = total / n
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(
                f"non-finite loss {mean_loss} at epoch {epoch}"
            )
        curve.append(mean_loss)
    model.eval()
    return curve


def predict(
    model: ForceDistributionNet, strain: np.ndarray, scalars: np.ndarray
) -> np.ndarray:
    """Forward pass to numpy. Accepts one profile or a batch."""
    strain = np.asarray(strain, dtype=float)
    scalars = np.asarray(scalars, dtype=float)
    single = strain.ndim == 1
    if single:
        strain = strain[None, :]
    if scalars.ndim == 0:
        scalars = scalars[None]
    if scalars.ndim == 1:
        scalars = scalars[:, None]
    dtype = next(model.parameters()).dtype
    model.eval()
    with torch.no_grad():
        out = model(
            torch.as_tensor(strain, dtype=dtype),
            torch.as_tensor(scalars, dtype=dtype),
        ).numpy()
    return out[0] if single else out


def _arch_sha256(spec: NetSpec, state: dict) -> str:
    entries = [
        (name, tuple(t.shape), str(t.dtype)) for name, t in sorted(state.items())
    ]
    blob = json.dumps([asdict(spec), entries], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def save_checkpoint(model: ForceDistributionNet, path) -> None:
    state = model.state_dict()
    torch.save(
        {
            "format": FORMAT_TAG,
            "spec": asdict(model.spec),
            "arch_sha256": _arch_sha256(model.spec, state),
            "state": state,
        },
        path,
    )


def load_checkpoint(path) -> ForceDistributionNet:
    doc = torch.load(path, weights_only=False)
    if doc.get("format") != FORMAT_TAG:
        raise ValueError(f"{path}: not a {FORMAT_TAG} file")
    raw = dict(doc["spec"])
    for key in ("conv_channels", "kernel_sizes", "paddings", "dilations", "head_hidden"):
        raw[key] = tuple(raw[key])
    spec = NetSpec(**raw)
    model = ForceDistributionNet(spec)
    if _arch_sha256(spec, doc["state"]) != doc["arch_sha256"]:
        raise ValueError(f"{path}: architecture hash mismatch")
    model.load_state_dict(doc["state"])
    model.eval()
    return model


def finite_difference_check(
    model: ForceDistributionNet,
    strain: np.ndarray,
    scalars: np.ndarray,
    targets: np.ndarray,
    eps: float = 1e-4,
    n_probe: int = 20,
    seed: int = 0,
) -> dict[str, float]:
    """Compare autograd against central differences, parameter by parameter.

    Runs the model as given (use double precision and eval mode for tight
    tolerances). Returns the max relative error per parameter tensor over
    up to n_probe randomly probed entries.
    """
    if scalars.ndim == 1:
        scalars = scalars[:, None]
    dtype = next(model.parameters()).dtype
    xs = torch.as_tensor(strain, dtype=dtype)
    ss = torch.as_tensor(scalars, dtype=dtype)
    ts = torch.as_tensor(targets, dtype=dtype)
    model.eval()

    model.zero_grad()
    loss_mse(model(xs, ss), ts).backward()
    grads = {
        name: p.grad.detach().clone() for name, p in model.named_parameters()
    }

    def loss_value() -> float:
        with torch.no_grad():
            return float(loss_mse(model(xs, ss), ts))

    rng = np.random.default_rng(seed)
    report: dict[str, float] = {}
    for name, p in model.named_parameters():
        flat = p.data.view(-1)
        n = flat.numel()
        picks = rng.choice(n, size=min(n_probe, n), replace=False)
        worst = 0.0
        for i in picks:
            orig = float(flat[i])
            flat[i] = orig + eps
            up = loss_value()
            flat[i] = orig - eps
            down = loss_value()
            flat[i] = orig
            fd = (up - down) / (2.0 * eps)
            ad = float(grads[name].view(-1)[i])
            rel = abs(fd - ad) / max(abs(fd), abs(ad), 1e-6)
            worst = max(worst, rel)
        report[name] = worst
    return report
