"""Deterministic U-net backbone g_theta(x) shared by both probabilistic heads.

Four encoder and four decoder blocks of three 3x3 convolutions each,
channel doubling per encoder block, max-pool downsampling, bilinear
upsampling and dropout on the lowest-level feature map only.
"""

from dataclasses import asdict, dataclass
from typing import List, Tuple

import torch
import torch.nn.functional as F
from torch import nn, Tensor


@dataclass(frozen=True)
class BackboneConfig:
    in_channels: int = 1
    base_channels: int = 32
    depth: int = 4
    convs_per_block: int = 3
    bottleneck_dropout_p: float = 0.5
    normalization: str = "none"     # "none" | "batch"

    def __post_init__(self):
        if self.depth < 1 or self.convs_per_block < 1:
            raise ValueError("depth and convs_per_block must be >= 1")
        if self.in_channels < 1 or self.base_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if self.normalization not in ("none", "batch"):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def widths(self) -> List[int]:
        return [self.base_channels * 2 ** i for i in range(self.depth)]

    @property
    def code_size(self) -> int:
        return self.widths[-1]

    @property
    def divisor(self) -> int:
        return 2 ** self.depth

    def to_dict(self) -> dict:
        return asdict(self)


def check_spatial(x: Tensor, divisor: int) -> None:
    if x.dim() != 4:
        raise ValueError(f"expected a (B, C, H, W) tensor, got shape {tuple(x.shape)}")
    h, w = x.shape[-2:]
    if h % divisor or w % divisor:
        raise ValueError(f"spatial size {h}x{w} is not divisible by {divisor}")


class ConvBlock(nn.Sequential):
    def __init__(self, in_ch: int, out_ch: int, n_convs: int, normalization: str):
        layers = []
        for i in range(n_convs):
            layers.append(nn.Conv2d(in_ch if i == 0 else out_ch, out_ch, 3, padding=1))
            if normalization == "batch":
                layers.append(nn.BatchNorm2d(out_ch))
            layers.append(nn.ReLU(inplace=True))
        super().__init__(*layers)


class UNetEncoder(nn.Module):
    """Contraction path. Also used on its own by the prior and posterior nets."""

    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.config = config
        widths = config.widths
        self.blocks = nn.ModuleList(
            ConvBlock(config.in_channels if i == 0 else widths[i - 1], w,
                      config.convs_per_block, config.normalization)
            for i, w in enumerate(widths))
        self.dropout = nn.Dropout(config.bottleneck_dropout_p)

    def forward(self, x: Tensor) -> Tuple[Tensor, List[Tensor]]:
        """Returns (bottleneck at H / 2**depth, skip features per level)."""
        check_spatial(x, self.config.divisor)
        if x.shape[1] != self.config.in_channels:
            raise ValueError(f"expected {self.config.in_channels} input channels, got {x.shape[1]}")
        skips = []
        for block in self.blocks:
            x = block(x)
            skips.append(x)
            x = F.max_pool2d(x, 2)
        return self.dropout(x), skips

    def code(self, x: Tensor) -> Tensor:
        """Global-average-pooled bottleneck, (B, code_size)."""
        bottleneck, _ = self(x)
        return bottleneck.mean(dim=(2, 3))


class UNetDecoder(nn.Module):
    def __init__(self, config: BackboneConfig):
        super().__init__()
        widths = config.widths
        # lowest level first: upsampled bottleneck (widths[-1]) + skip
        in_widths = [widths[-1]] + widths[:0:-1]
        self.blocks = nn.ModuleList(
            ConvBlock(up + skip, skip, config.convs_per_block, config.normalization)
            for up, skip in zip(in_widths, widths[::-1]))

    def forward(self, bottleneck: Tensor, skips: List[Tensor]) -> Tensor:
        x = bottleneck
        for block, skip in zip(self.blocks, reversed(skips)):
            x = F.interpolate(x, size=skip.shape[-2:], mode="bilinear", align_corners=False)
            x = block(torch.cat([x, skip], dim=1))
        return x


class UNetBackbone(nn.Module):
    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.config = config
        self.encoder = UNetEncoder(config)
        self.decoder = UNetDecoder(config)

    @property
    def out_channels(self) -> int:
        return self.config.base_channels

    def forward_features(self, x: Tensor) -> Tensor:
        """(B, C, H, W) -> (B, base_channels, H, W)."""
        bottleneck, skips = self.encoder(x)
        return self.decoder(bottleneck, skips)

    def encoder_path(self, x: Tensor) -> Tensor:
        return self.encoder.code(x)

    forward = forward_features
