"""Mask-estimation enhancement network (ConvTasNet family).

A learned encoder/decoder filterbank around a temporal convolutional
separator that predicts a sigmoid mask over encoder channels. The exact
depth/width per size preset is a free choice tuned to hit the challenge's
parameter budgets: medium 437K, small 224K, tiny 138.8K (within 5%).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

PARAMETER_BUDGETS = {"medium": 437_000, "small": 224_000, "tiny": 138_800}
BUDGET_TOLERANCE = 0.05


@dataclass(frozen=True)
class ArchSpec:
    """Free architecture hyperparameters of one size preset."""

    encoder_filters: int  # N: encoder/decoder basis size
    encoder_kernel: int  # L: basis length (stride L/2)
    bottleneck: int  # B: residual channel width
    hidden: int  # H: depthwise block width
    kernel: int  # P: depthwise kernel
    blocks_per_repeat: int  # X: dilation doubles per block
    repeats: int  # R

    def to_dict(self) -> dict:
        return self.__dict__.copy()


# Tuned against PARAMETER_BUDGETS; see tests/test_model.py.
SIZE_PRESETS: dict[str, ArchSpec] = {
    "medium": ArchSpec(encoder_filters=128, encoder_kernel=32, bottleneck=80,
                       hidden=160, kernel=3, blocks_per_repeat=5, repeats=3),
    "small": ArchSpec(encoder_filters=128, encoder_kernel=32, bottleneck=64,
                      hidden=96, kernel=3, blocks_per_repeat=5, repeats=3),
    "tiny": ArchSpec(encoder_filters=128, encoder_kernel=32, bottleneck=80,
                     hidden=64, kernel=3, blocks_per_repeat=5, repeats=2),
}


class GlobalLayerNorm(nn.Module):
    """Normalize over channels and time jointly (gLN)."""

    def __init__(self, channels: int):
        super().__init__()
        self.gamma = nn.Parameter(torch.ones(1, channels, 1))
        self.beta = nn.Parameter(torch.zeros(1, channels, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mean = x.mean(dim=(1, 2), keepdim=True)
        var = x.var(dim=(1, 2), keepdim=True, unbiased=False)
        return self.gamma * (x - mean) / torch.sqrt(var + 1e-8) + self.beta


class TemporalBlock(nn.Module):
    def __init__(self, bottleneck: int, hidden: int, kernel: int, dilation: int):
        super().__init__()
        pad = (kernel - 1) * dilation // 2
        self.net = nn.Sequential(
            nn.Conv1d(bottleneck, hidden, 1),
            nn.PReLU(),
            GlobalLayerNorm(hidden),
            nn.Conv1d(hidden, hidden, kernel, dilation=dilation, padding=pad, groups=hidden),
            nn.PReLU(),
            GlobalLayerNorm(hidden),
            nn.Conv1d(hidden, bottleneck, 1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.net(x)


class MaskEnhancer(nn.Module):
    """Waveform in, enhanced waveform out (same length)."""

    def __init__(self, spec: ArchSpec):
        super().__init__()
        self.spec = spec
        stride = spec.encoder_kernel // 2
        self.encoder = nn.Conv1d(1, spec.encoder_filters, spec.encoder_kernel,
                                 stride=stride, bias=False)
        self.input_norm = GlobalLayerNorm(spec.encoder_filters)
        self.input_proj = nn.Conv1d(spec.encoder_filters, spec.bottleneck, 1)
        blocks = []
        for _ in range(spec.repeats):
            for x in range(spec.blocks_per_repeat):
                blocks.append(TemporalBlock(spec.bottleneck, spec.hidden, spec.kernel, 2**x))
        self.separator = nn.Sequential(*blocks)
        self.mask_head = nn.Sequential(
            nn.PReLU(),
            nn.Conv1d(spec.bottleneck, spec.encoder_filters, 1),
            nn.Sigmoid(),
        )
        self.decoder = nn.ConvTranspose1d(spec.encoder_filters, 1, spec.encoder_kernel,
                                          stride=stride, bias=False)

    def forward(self, waveform: torch.Tensor) -> torch.Tensor:
        if waveform.dim() == 2:
            waveform = waveform.unsqueeze(1)  # (batch, 1, time)
        n_samples = waveform.shape[-1]
        stride = self.spec.encoder_kernel // 2
        pad = (-(n_samples - self.spec.encoder_kernel)) % stride
        if pad:
            waveform = nn.functional.pad(waveform, (0, pad))
        latent = self.encoder(waveform)
        mask = self.mask_head(self.separator(self.input_proj(self.input_norm(latent))))
        out = self.decoder(latent * mask)
        return out[..., :n_samples].squeeze(1)


def build_model(size: str) -> MaskEnhancer:
    if size not in SIZE_PRESETS:
        raise ValueError(f"unknown model size {size!r}; expected one of {sorted(SIZE_PRESETS)}")
    return MaskEnhancer(SIZE_PRESETS[size])


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def check_budget(size: str, model: nn.Module) -> None:
    budget = PARAMETER_BUDGETS[size]
    count = parameter_count(model)
    if abs(count - budget) > BUDGET_TOLERANCE * budget:
        raise ValueError(
            f"{size} model has {count} parameters, outside {budget} +/- {BUDGET_TOLERANCE:.0%}"
        )
