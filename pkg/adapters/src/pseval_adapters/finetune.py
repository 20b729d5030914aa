"""Speaker-specific fine-tuning of the enhancement model.

Consumes the harness's fine-tune ledger (pre-mixed noisy/clean wav pairs),
optimizes the negative-SDR loss with Adam at a low learning rate, and stops
once validation loss has not improved for the configured patience.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .bridges import AdapterError
from .model import ArchSpec, MaskEnhancer, SIZE_PRESETS, check_budget, parameter_count
from .wavio import read_wav


@dataclass
class FinetuneConfig:
    """The fine-tuning recipe; defaults follow the challenge baseline.

    No gradient clipping and no weight decay (the recipe names neither);
    train_snr_range is provenance of how the ledger was mixed, not a knob
    the runner re-rolls.
    """

    model_size: str = "tiny"
    learning_rate: float = 1e-6
    batch_size: int = 8
    early_stop_patience: int = 20
    train_snr_range: tuple[float, float] = (-5.0, 5.0)
    loss: str = "negative_sdr"
    max_epochs: int = 10_000
    segment_seconds: float = 2.0
    sample_rate_hz: int = 16000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.model_size not in SIZE_PRESETS:
            raise ValueError(f"unknown model size {self.model_size!r}")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss != "negative_sdr":
            raise ValueError(f"unsupported loss {self.loss!r}")
        low, high = self.train_snr_range
        if not (low <= high):
            raise ValueError(f"invalid train_snr_range {self.train_snr_range}")
        object.__setattr__(self, "train_snr_range", (float(low), float(high)))


def negative_sdr_loss(estimate: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """-SDR averaged over the batch, computed in float64 so that the
    slow drift under a 1e-6 learning rate stays visible in the logs."""
    est = estimate.double()
    tgt = target.double()
    signal = torch.sum(tgt * tgt, dim=-1)
    error = torch.sum((est - tgt) ** 2, dim=-1) + 1e-12
    sdr = 10.0 * torch.log10(signal / error + 1e-12)
    return -sdr.mean()


def _load_segment(path: str, n_samples: int) -> np.ndarray:
    samples, _rate = read_wav(path)
    if samples.size >= n_samples:
        return samples[:n_samples]
    return np.pad(samples, (0, n_samples - samples.size))


class LedgerDataset:
    """In-memory (noisy, clean) pairs for one role of a fine-tune ledger."""

    def __init__(self, entries: list[dict], root: str, role: str, cfg: FinetuneConfig):
        n_samples = int(cfg.segment_seconds * cfg.sample_rate_hz)
        pairs = []
        for entry in sorted(
            (e for e in entries if e.get("role") == role),
            key=lambda e: (e.get("speaker_id", ""), e.get("mixture_id", "")),
        ):
            noisy = _load_segment(str(Path(root) / entry["output_path"]), n_samples)
            clean = _load_segment(str(Path(root) / entry["reference_path"]), n_samples)
            pairs.append((noisy, clean))
        if not pairs:
            raise AdapterError(f"ledger has no '{role}' entries")
        self.noisy = torch.tensor(np.stack([p[0] for p in pairs]), dtype=torch.float32)
        self.clean = torch.tensor(np.stack([p[1] for p in pairs]), dtype=torch.float32)

    def __len__(self) -> int:
        return self.noisy.shape[0]


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float

    def to_record(self) -> dict:
        return asdict(self)


@dataclass
class FinetuneResult:
    checkpoint_path: str
    log: list[EpochStats] = field(default_factory=list)
    best_val_loss: float = math.inf
    epochs_run: int = 0
    stopped_early: bool = False


def save_checkpoint(
    model: MaskEnhancer, cfg: FinetuneConfig, path: str,
    val_loss: float | None = None, epoch: int = 0,
) -> None:
    torch.save(
        {
            "arch": model.spec.to_dict(),
            "model_size": cfg.model_size,
            "state_dict": model.state_dict(),
            "config": {**asdict(cfg), "train_snr_range": list(cfg.train_snr_range)},
            "val_loss": val_loss,
            "epoch": epoch,
            "parameter_count": parameter_count(model),
        },
        path,
    )


def load_checkpoint(path: str) -> tuple[MaskEnhancer, dict]:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise AdapterError(f"cannot load checkpoint {path}: {exc}") from exc
    model = MaskEnhancer(ArchSpec(**payload["arch"]))
    model.load_state_dict(payload["state_dict"])
    return model, payload


def make_toy_checkpoint(size: str, seed: int, path: str) -> None:
    """Randomly initialized 'generalist' stand-in for desk-scale tests."""
    torch.manual_seed(seed)
    cfg = FinetuneConfig(model_size=size, seed=seed)
    model = MaskEnhancer(SIZE_PRESETS[size])
    check_budget(size, model)
    save_checkpoint(model, cfg, path, val_loss=None, epoch=0)


def _evaluate(model: MaskEnhancer, data: LedgerDataset, batch_size: int) -> float:
    model.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(data), batch_size):
            noisy = data.noisy[start : start + batch_size]
            clean = data.clean[start : start + batch_size]
            loss = negative_sdr_loss(model(noisy), clean)
            total += float(loss) * noisy.shape[0]
    return total / len(data)


def finetune_pse(
    generalist_checkpoint: str,
    ledger_path: str,
    mix_root: str,
    cfg: FinetuneConfig,
    out_checkpoint: str,
    log_path: str | None = None,
) -> FinetuneResult:
    """Fine-tune the generalist into a speaker-specific model.

    Stops when validation loss has not strictly improved for
    ``cfg.early_stop_patience`` consecutive epochs (or at max_epochs). The
    saved checkpoint holds the best-validation weights.
    """
    entries = []
    with open(ledger_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    train = LedgerDataset(entries, mix_root, "train", cfg)
    val = LedgerDataset(entries, mix_root, "validation", cfg)

    model, payload = load_checkpoint(generalist_checkpoint)
    if payload.get("model_size") != cfg.model_size:
        raise AdapterError(
            f"checkpoint is a {payload.get('model_size')!r} model, config says {cfg.model_size!r}"
        )
    torch.manual_seed(cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    result = FinetuneResult(checkpoint_path=out_checkpoint)
    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    best_epoch = 0
    since_improvement = 0
    order_rng = torch.Generator().manual_seed(cfg.seed)

    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        perm = torch.randperm(len(train), generator=order_rng)
        total = 0.0
        for start in range(0, len(train), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            noisy, clean = train.noisy[idx], train.clean[idx]
            optimizer.zero_grad()
            loss = negative_sdr_loss(model(noisy), clean)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * noisy.shape[0]
        train_loss = total / len(train)
        if not math.isfinite(train_loss):
            raise AdapterError(f"training diverged at epoch {epoch}: loss {train_loss}")
        val_loss = _evaluate(model, val, cfg.batch_size)
        result.log.append(EpochStats(epoch=epoch, train_loss=train_loss, val_loss=val_loss))
        result.epochs_run = epoch

        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
            best_epoch = epoch
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= cfg.early_stop_patience:
                result.stopped_early = True
                break

    model.load_state_dict(best_state)
    save_checkpoint(model, cfg, out_checkpoint, val_loss=result.best_val_loss, epoch=best_epoch)
    if log_path:
        with open(log_path, "w", encoding="utf-8") as fh:
            for stats in result.log:
                fh.write(json.dumps(stats.to_record(), sort_keys=True))
                fh.write("\n")
    return result


def validation_loss_of_checkpoint(
    checkpoint_path: str, ledger_path: str, mix_root: str, cfg: FinetuneConfig
) -> float:
    """Recompute the saved model's validation loss (serialization check)."""
    entries = []
    with open(ledger_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entries.append(json.loads(line))
    val = LedgerDataset(entries, mix_root, "validation", cfg)
    model, _ = load_checkpoint(checkpoint_path)
    return _evaluate(model, val, cfg.batch_size)
