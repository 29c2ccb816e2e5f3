"""Compact time-domain masking denoiser.

A linear encoder maps the waveform into a learned filterbank representation,
a temporal convolutional stack predicts a multiplicative mask for the single
target source, and a linear decoder maps the masked representation back to a
waveform. Encoder and decoder are bias-free, so silence maps to exact
silence.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import TrainConfig


class ConvBlock(nn.Module):
    """Dilated depthwise-separable block with residual and skip paths."""

    def __init__(self, bottleneck: int, channels: int, kernel: int, dilation: int):
        super().__init__()
        self.expand = nn.Conv1d(bottleneck, channels, 1)
        self.prelu1 = nn.PReLU()
        self.norm1 = nn.GroupNorm(1, channels, eps=1e-8)
        pad = (kernel - 1) // 2 * dilation
        self.depthwise = nn.Conv1d(
            channels, channels, kernel, padding=pad, dilation=dilation, groups=channels
        )
        self.prelu2 = nn.PReLU()
        self.norm2 = nn.GroupNorm(1, channels, eps=1e-8)
        self.residual = nn.Conv1d(channels, bottleneck, 1)
        self.skip = nn.Conv1d(channels, bottleneck, 1)

    def forward(self, x):
        y = self.norm1(self.prelu1(self.expand(x)))
        y = self.norm2(self.prelu2(self.depthwise(y)))
        return x + self.residual(y), self.skip(y)


class Denoiser(nn.Module):
    def __init__(self, cfg: TrainConfig):
        super().__init__()
        self.kernel = cfg.encoder_kernel
        self.stride = cfg.encoder_kernel // 2
        self.encoder = nn.Conv1d(1, cfg.encoder_filters, cfg.encoder_kernel,
                                 stride=self.stride, bias=False)
        self.ingress_norm = nn.GroupNorm(1, cfg.encoder_filters, eps=1e-8)
        self.bottleneck = nn.Conv1d(cfg.encoder_filters, cfg.bottleneck_channels, 1)
        self.blocks = nn.ModuleList(
            ConvBlock(cfg.bottleneck_channels, cfg.channels, cfg.conv_kernel, 2**i)
            for _ in range(cfg.repeats)
            for i in range(cfg.blocks_per_repeat)
        )
        self.mask_prelu = nn.PReLU()
        self.mask = nn.Conv1d(cfg.bottleneck_channels, cfg.encoder_filters, 1)
        self.decoder = nn.ConvTranspose1d(cfg.encoder_filters, 1, cfg.encoder_kernel,
                                          stride=self.stride, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: [batch, 1, samples] -> denoised waveform of the same shape."""
        n = x.shape[-1]
        pad = (-(n - self.kernel)) % self.stride if n >= self.kernel else self.kernel - n
        if pad:
            x = F.pad(x, (0, pad))
        rep = torch.relu(self.encoder(x))
        y = self.bottleneck(self.ingress_norm(rep))
        skip_sum = 0
        for block in self.blocks:
            y, skip = block(y)
            skip_sum = skip_sum + skip
        gain = torch.sigmoid(self.mask(self.mask_prelu(skip_sum)))
        out = self.decoder(rep * gain)
        if out.shape[-1] < n:
            out = F.pad(out, (0, n - out.shape[-1]))
        return out[..., :n]
