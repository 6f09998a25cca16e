"""Mini-batch training: Adam on the per-element MSE between model output
and HR ground truth, with a seeded validation split, early stopping, and
best-validation checkpointing.

The checkpoint is the arch module's model file; the log file holds one
tab-separated line per epoch: epoch, train loss, validation loss, seconds.
"""

import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import arch, data, nn


@dataclass
class TrainConfig:
    architecture: str
    scale: int
    dataset: str
    checkpoint: str
    batch_size: int = 64
    max_epochs: int = 30
    patience: int = 10
    seed: int = 42
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    val_fraction: float = 0.05
    final_relu: bool = False
    log_path: str = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    seconds: float
    checksum: str  # sha256 prefix of the parameter bytes after the epoch


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def lines(self):
        return [
            f"{r.epoch}\t{r.train_loss!r}\t{r.val_loss!r}\t{r.seconds:.3f}"
            for r in self.records
        ]


def _param_checksum(model) -> str:
    return hashlib.sha256(arch.parameter_vector(model).tobytes()).hexdigest()[:16]


def _epoch_loss(model, lr, hr, indices, batch_size) -> float:
    total = 0.0
    for start in range(0, len(indices), batch_size):
        idx = indices[start : start + batch_size]
        out = arch.forward_batch(model, lr[idx])
        loss, _ = nn.mse_loss(out, hr[idx])
        total += loss * len(idx)
    return total / len(indices)


def train(config: TrainConfig, progress=None):
    """Run the training loop; returns (best model, TrainLog).

    Deterministic for a fixed config: the split, the per-epoch shuffles and
    the parameter trajectory all derive from `config.seed`. The checkpoint
    at `config.checkpoint` always holds the best-validation-loss epoch.
    """
    manifest, lr_patches, hr_patches = data.load_dataset(config.dataset)
    dataset_scale = int(manifest["scale"])
    if dataset_scale != config.scale:
        raise ValueError(
            f"dataset was built at scale {dataset_scale}, requested scale {config.scale}"
        )
    if arch.ARCH_SCALES.get(config.architecture) != config.scale:
        raise ValueError(
            f"architecture {config.architecture} does not upscale by {config.scale}"
        )
    n = lr_patches.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")

    model = arch.build(config.architecture, config.scale, config.seed,
                       final_relu=config.final_relu)
    params = arch.parameters(model)
    state = nn.adam_init(params, config.learning_rate, config.beta1,
                         config.beta2, config.epsilon)

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    n_val = int(round(n * config.val_fraction)) if config.val_fraction > 0 else 0
    n_val = min(max(n_val, 1 if config.val_fraction > 0 and n > 1 else 0), n - 1)
    val_idx = perm[:n_val]
    train_idx = perm[n_val:]

    log = TrainLog()
    log_file = None
    if config.log_path:
        Path(config.log_path).parent.mkdir(parents=True, exist_ok=True)
        log_file = open(config.log_path, "w", encoding="utf-8")

    best_val = np.inf
    stale = 0
    try:
        for epoch in range(1, config.max_epochs + 1):
            t0 = time.perf_counter()
            order = train_idx[rng.permutation(len(train_idx))]
            total = 0.0
            for start in range(0, len(order), config.batch_size):
                idx = order[start : start + config.batch_size]
                batch = lr_patches[idx]
                values = arch.forward_values(model, batch)
                loss, grad = nn.mse_loss(values[-1], hr_patches[idx])
                grads = arch.backward_batch(model, batch, grad, values=values)
                nn.adam_step(state, params, arch.grads_as_list(grads))
                total += loss * len(idx)
            train_loss = total / len(order)
            if len(val_idx):
                val_loss = _epoch_loss(model, lr_patches, hr_patches, val_idx,
                                       config.batch_size)
            else:
                val_loss = train_loss
            seconds = time.perf_counter() - t0
            record = EpochRecord(epoch, train_loss, val_loss, seconds,
                                 _param_checksum(model))
            log.records.append(record)
            if log_file:
                log_file.write(
                    f"{epoch}\t{train_loss!r}\t{val_loss!r}\t{seconds:.3f}\n"
                )
                log_file.flush()
            if progress:
                progress(record)
            if val_loss < best_val:
                best_val = val_loss
                stale = 0
                arch.save(model, config.checkpoint)
            else:
                stale += 1
                if stale >= config.patience:
                    break
    finally:
        if log_file:
            log_file.close()
    return arch.load(config.checkpoint), log
