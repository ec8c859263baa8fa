"""Shared base for the style-conditioned uncertainty models."""

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch
from torch import nn, Tensor

from config import settings
from core.generators import make_generator
from core.registry import model_registry
from metrics.sample_sets import PredictiveSampleSet
from models.conditioning import check_styles
from models.unet import BackboneConfig

logger = logging.getLogger(__name__)

StyleArg = Union[int, Tensor, None]


@dataclass(frozen=True)
class ModelSettings:
    """Architecture and loss settings shared by both model families.

    `conditioned=False` gives the unconditioned baselines: the style
    block has zero width and style ids are ignored.
    """

    in_channels: int = 1
    num_styles: int = 1
    conditioned: bool = True
    base_channels: int = 32
    depth: int = 4
    convs_per_block: int = 3
    dropout_p: float = 0.5
    normalization: str = "none"
    zero_init_heads: bool = True
    # conditioned probabilistic U-net
    latent_dim: int = 6
    beta: float = 1.0
    # conditioned SSN
    rank: int = 10
    mc_samples: int = 20
    style_embedding: bool = False

    def __post_init__(self):
        if self.num_styles < 1:
            raise ValueError("num_styles must be >= 1")
        if self.latent_dim < 1 or self.rank < 0 or self.mc_samples < 1:
            raise ValueError("latent_dim >= 1, rank >= 0 and mc_samples >= 1 are required")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")

    @property
    def style_width(self) -> int:
        return self.num_styles if self.conditioned else 0

    def backbone(self, extra_channels: int = 0) -> BackboneConfig:
        return BackboneConfig(
            in_channels=self.in_channels + extra_channels,
            base_channels=self.base_channels,
            depth=self.depth,
            convs_per_block=self.convs_per_block,
            bottleneck_dropout_p=self.dropout_p,
            normalization=self.normalization,
        )

    @classmethod
    def from_dict(cls, values: dict) -> "ModelSettings":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown model settings: {sorted(unknown)}")
        return cls(**values)


class SegmentationModel(nn.Module, ABC):
    """A predictive distribution over binary segmentations given (x, l)."""

    registry_id: str = "base"
    display_name: str = "base model"

    def __init__(self, model_settings: ModelSettings):
        super().__init__()
        self.settings = model_settings

    # -- subclass contract --------------------------------------------------

    @abstractmethod
    def loss(self, x: Tensor, a: Tensor, styles: StyleArg,
             generator: Optional[torch.Generator] = None) -> Tensor:
        """Batch-mean training loss for annotations a (B, H, W) in {0, 1}."""

    @abstractmethod
    def sample_logits(self, x: Tensor, styles: StyleArg, n: int,
                      generator: torch.Generator) -> Tensor:
        """(n, B, H, W) logit fields drawn from the predictive distribution."""

    @abstractmethod
    def mean_logits(self, x: Tensor, styles: StyleArg) -> Tensor:
        """(B, H, W) logits of the distribution's central parameter."""

    # -- shared behaviour ---------------------------------------------------

    @property
    def conditioned(self) -> bool:
        return self.settings.conditioned

    @property
    def num_styles(self) -> int:
        return self.settings.num_styles

    @property
    def device(self) -> torch.device:
        return next(self.parameters()).device

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def batch_styles(self, styles: StyleArg, batch: int) -> Optional[Tensor]:
        """Validated (B,) style tensor, or None for an unconditioned model."""
        if styles is None:
            if self.conditioned:
                raise ValueError(f"{self.display_name} is conditioned and needs a style id")
            return None
        styles = torch.as_tensor(styles, dtype=torch.long)
        if styles.dim() == 0:
            styles = styles.expand(batch)
        styles = check_styles(styles, self.num_styles)
        if styles.numel() != batch:
            raise ValueError(f"{styles.numel()} style ids for a batch of {batch}")
        return styles.to(self.device) if self.conditioned else None

    def _image_batch(self, x) -> Tensor:
        x = torch.as_tensor(np.asarray(x) if not isinstance(x, Tensor) else x)
        if x.dim() == 2:
            x = x[None]
        if x.dim() == 3:
            x = x[None]
        return x.to(device=self.device, dtype=self.dtype)

    def _style_label(self, style: StyleArg):
        return int(style) if self.conditioned and style is not None else "unconditioned"

    @torch.no_grad()
    def sample_image_logits(self, x, style: StyleArg, n: int,
                            seed: Optional[int] = None,
                            generator: Optional[torch.Generator] = None) -> Tensor:
        """(n, H, W) logits for one image, decoded in chunks."""
        if n < 1:
            raise ValueError("n must be >= 1")
        xb = self._image_batch(x)
        gen = make_generator(seed, generator, self.device)
        chunks, remaining = [], n
        while remaining > 0:
            k = min(settings.SAMPLE_CHUNK, remaining)
            chunks.append(self.sample_logits(xb, style, k, gen)[:, 0])
            remaining -= k
        return torch.cat(chunks)

    def sample_predictions(self, x, style: StyleArg, n: int,
                           seed: Optional[int] = None,
                           generator: Optional[torch.Generator] = None) -> PredictiveSampleSet:
        """n thresholded samples; logits > 0 (p > 0.5) is foreground, ties are background."""
        logits = self.sample_image_logits(x, style, n, seed, generator)
        masks = (logits > 0).to(torch.uint8).cpu().numpy()
        return PredictiveSampleSet(masks, self.registry_id, self._style_label(style))

    def sample_with_probabilities(self, x, style: StyleArg, n: int,
                                  seed: Optional[int] = None):
        """Samples plus the pixel-wise predictive probability from the same draws."""
        logits = self.sample_image_logits(x, style, n, seed)
        masks = (logits > 0).to(torch.uint8).cpu().numpy()
        prob = torch.sigmoid(logits.double()).mean(0).cpu().numpy()
        return PredictiveSampleSet(masks, self.registry_id, self._style_label(style)), prob

    @torch.no_grad()
    def mean_prediction(self, x, style: StyleArg) -> np.ndarray:
        logits = self.mean_logits(self._image_batch(x), style)[0]
        return (logits > 0).to(torch.uint8).cpu().numpy()

    # -- persistence ----------------------------------------------------------

    def model_card(self) -> dict:
        return {"model": self.registry_id, "name": self.display_name,
                "version": settings.APP_VERSION, **asdict(self.settings)}

    def save_checkpoint(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save({"model": self.registry_id, "settings": asdict(self.settings),
                    "state_dict": self.state_dict()}, path)
        path.with_name(path.stem + ".model_card.json").write_text(
            json.dumps(self.model_card(), indent=2))
        return path

    @staticmethod
    def load_checkpoint(path: Union[str, Path],
                        expected: Optional[ModelSettings] = None,
                        map_location: Union[str, torch.device] = "cpu") -> "SegmentationModel":
        """Rebuild a model from a checkpoint; settings must match `expected` if given."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        blob = torch.load(path, map_location=map_location, weights_only=False)
        stored = ModelSettings.from_dict(blob["settings"])
        if expected is not None and stored != expected:
            raise ValueError(f"checkpoint {path} was written for {stored}, expected {expected}")
        model = model_registry.create(blob["model"], stored)
        model.load_state_dict(blob["state_dict"])
        return model.to(map_location)
