"""Tiled one-hot style planes for torch inputs and feature maps."""

from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn, Tensor

from core.types import InvalidStyleError


def check_styles(styles: Tensor, num_styles: int) -> Tensor:
    styles = torch.as_tensor(styles, dtype=torch.long).reshape(-1)
    if styles.numel() and (styles.min() < 0 or styles.max() >= num_styles):
        raise InvalidStyleError(
            f"style ids {styles.tolist()} out of range for {num_styles} styles")
    return styles


def style_planes(styles: Tensor, num_styles: int, height: int, width: int,
                 dtype=torch.float32) -> Tensor:
    """(B, num_styles, H, W) block; plane styles[b] is ones for batch item b."""
    styles = check_styles(styles, num_styles)
    onehot = F.one_hot(styles, num_styles).to(dtype)
    return onehot[:, :, None, None].expand(-1, -1, height, width)


class StyleEncoder(nn.Module):
    """Maps style ids to planes appended to a tensor's channel axis.

    `width` 0 is the unconditioned case: the input passes through untouched.
    With `learned=True` the one-hot code goes through a linear embedding of
    the same width before tiling.
    """

    def __init__(self, num_styles: int, width: Optional[int] = None, learned: bool = False):
        super().__init__()
        self.num_styles = num_styles
        self.width = num_styles if width is None else width
        self.embedding = nn.Linear(num_styles, self.width, bias=False) if learned and self.width else None

    def planes(self, styles: Tensor, height: int, width: int, dtype) -> Tensor:
        styles = check_styles(styles, self.num_styles)
        code = F.one_hot(styles, self.num_styles).to(dtype)
        if self.embedding is not None:
            code = self.embedding(code)
        return code[:, :, None, None].expand(-1, -1, height, width)

    def forward(self, x: Tensor, styles: Optional[Tensor]) -> Tensor:
        if self.width == 0:
            return x
        if styles is None:
            raise InvalidStyleError("a conditioned model needs a style id")
        styles = torch.as_tensor(styles, device=x.device)
        if styles.dim() == 0:
            styles = styles.expand(x.shape[0])
        if styles.numel() != x.shape[0]:
            raise ValueError(f"{styles.numel()} style ids for a batch of {x.shape[0]}")
        planes = self.planes(styles, x.shape[-2], x.shape[-1], x.dtype)
        return torch.cat([x, planes], dim=1)
