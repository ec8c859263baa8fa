"""Style-conditioned probabilistic U-net.

A prior net P(z | x, l) and a posterior net Q(z | x, a, l) each map their
input, with the tiled one-hot style appended to the channel axis, to a
diagonal Gaussian over a 6-d latent. A latent sample is broadcast over the
backbone features g(x) and combined by three 1x1 convolutions into one
logit per pixel.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn.functional as F
from torch import nn, Tensor
from torch.distributions import Independent, Normal, kl_divergence

from config import settings
from core.registry import model_registry
from models.base_model import ModelSettings, SegmentationModel, StyleArg
from models.conditioning import StyleEncoder
from models.unet import UNetBackbone, UNetEncoder


@dataclass(frozen=True, eq=False)
class DiagonalGaussian:
    """N(mean, diag(std**2)) over the latent; mean and std are (..., d)."""

    mean: Tensor
    std: Tensor

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise ValueError(f"mean {tuple(self.mean.shape)} and std "
                             f"{tuple(self.std.shape)} differ in shape")
        if not bool((self.std > 0).all()):
            raise ValueError("standard deviations must be strictly positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    def to_torch(self) -> Independent:
        return Independent(Normal(self.mean, self.std), 1)

    def rsample(self, generator: Optional[torch.Generator] = None,
                n: Optional[int] = None) -> Tensor:
        """Reparameterised draw; with n, shape (n, *mean.shape)."""
        shape = self.mean.shape if n is None else (n, *self.mean.shape)
        eps = torch.randn(shape, generator=generator, dtype=self.mean.dtype,
                          device=self.mean.device)
        return self.mean + self.std * eps


def kl_diag_gaussians(q: DiagonalGaussian, p: DiagonalGaussian) -> Tensor:
    """Closed-form KL(q || p), summed over latent dimensions."""
    if q.mean.shape != p.mean.shape:
        raise ValueError(f"cannot compare Gaussians of shapes {tuple(q.mean.shape)} "
                         f"and {tuple(p.mean.shape)}")
    return kl_divergence(q.to_torch(), p.to_torch())


def check_binary(a: Tensor) -> None:
    if not bool(((a == 0) | (a == 1)).all()):
        raise ValueError("annotations must be binary (0 or 1)")


def elbo_terms(logits: Tensor, a: Tensor, q: DiagonalGaussian, p: DiagonalGaussian,
               beta: float) -> Tuple[Tensor, Tensor, Tensor]:
    """(batch-mean loss, per-item BCE, per-item KL).

    BCE is summed over pixels with logits clipped to +-LOGIT_CLIP.
    """
    check_binary(a)
    clipped = logits.clamp(-settings.LOGIT_CLIP, settings.LOGIT_CLIP)
    bce = F.binary_cross_entropy_with_logits(clipped, a.to(logits.dtype),
                                             reduction="none").flatten(1).sum(1)
    kl = kl_diag_gaussians(q, p)
    return (bce + beta * kl).mean(), bce, kl


class LatentEncoder(nn.Module):
    """Contraction path + linear head emitting mean and log-variance."""

    def __init__(self, model_settings: ModelSettings, extra_channels: int):
        super().__init__()
        self.encoder = UNetEncoder(model_settings.backbone(extra_channels))
        self.head = nn.Linear(self.encoder.config.code_size, 2 * model_settings.latent_dim)
        if model_settings.zero_init_heads:
            nn.init.zeros_(self.head.weight)
            nn.init.zeros_(self.head.bias)

    def forward(self, x: Tensor) -> DiagonalGaussian:
        mean, log_var = self.head(self.encoder.code(x)).chunk(2, dim=1)
        return DiagonalGaussian(mean, torch.exp(0.5 * log_var))


@model_registry.register("cprob_unet")
class CProbUNet(SegmentationModel):
    display_name = "c-prob. U-net"

    def __init__(self, model_settings: ModelSettings):
        super().__init__(model_settings)
        sw = model_settings.style_width
        self.backbone = UNetBackbone(model_settings.backbone())
        self.prior_style = StyleEncoder(model_settings.num_styles, sw,
                                        learned=model_settings.style_embedding)
        self.posterior_style = StyleEncoder(model_settings.num_styles, sw,
                                            learned=model_settings.style_embedding)
        self.prior = LatentEncoder(model_settings, extra_channels=sw)
        self.posterior = LatentEncoder(model_settings, extra_channels=1 + sw)
        f, d = self.backbone.out_channels, model_settings.latent_dim
        self.combiner = nn.Sequential(
            nn.Conv2d(f + d, f, 1), nn.ReLU(inplace=True),
            nn.Conv2d(f, f, 1), nn.ReLU(inplace=True),
            nn.Conv2d(f, 1, 1),
        )

    def prior_encode(self, x: Tensor, styles: StyleArg) -> DiagonalGaussian:
        styles = self.batch_styles(styles, x.shape[0])
        return self.prior(self.prior_style(x, styles))

    def posterior_encode(self, x: Tensor, a: Tensor, styles: StyleArg) -> DiagonalGaussian:
        a = a if a.dim() == 4 else a.unsqueeze(1)
        if a.shape[0] != x.shape[0] or a.shape[-2:] != x.shape[-2:]:
            raise ValueError(f"annotation shape {tuple(a.shape)} does not match "
                             f"image shape {tuple(x.shape)}")
        styles = self.batch_styles(styles, x.shape[0])
        xa = torch.cat([x, a.to(x.dtype)], dim=1)
        return self.posterior(self.posterior_style(xa, styles))

    def model_card(self) -> dict:
        return {**super().model_card(), "posterior_input": "image+annotation+styles"}

    def combine(self, features: Tensor, z: Tensor) -> Tensor:
        """f_psi(g(x), z): (B, F, H, W) features and (B, d) latents -> (B, H, W) logits."""
        if not bool(torch.isfinite(z).all()):
            raise ValueError("latent sample is not finite")
        tiled = z[:, :, None, None].expand(-1, -1, *features.shape[-2:])
        return self.combiner(torch.cat([features, tiled], dim=1))[:, 0]

    def elbo_loss(self, x: Tensor, a: Tensor, styles: StyleArg,
                  beta: Optional[float] = None,
                  generator: Optional[torch.Generator] = None) -> Tensor:
        """Pixel-summed BCE for one posterior sample plus beta * KL(Q || P)."""
        check_binary(a)
        beta = self.settings.beta if beta is None else beta
        q = self.posterior_encode(x, a, styles)
        p = self.prior_encode(x, styles)
        z = q.rsample(generator)
        logits = self.combine(self.backbone(x), z)
        return elbo_terms(logits, a.reshape(logits.shape), q, p, beta)[0]

    def loss(self, x, a, styles, generator=None):
        return self.elbo_loss(x, a, styles, generator=generator)

    def sample_logits(self, x: Tensor, styles: StyleArg, n: int,
                      generator: Optional[torch.Generator] = None) -> Tensor:
        b = x.shape[0]
        features = self.backbone(x)
        z = self.prior_encode(x, styles).rsample(generator, n=n)       # (n, B, d)
        feats = features.unsqueeze(0).expand(n, *features.shape).reshape(n * b, *features.shape[1:])
        logits = self.combine(feats, z.reshape(n * b, -1))
        return logits.reshape(n, b, *logits.shape[-2:])

    def mean_logits(self, x: Tensor, styles: StyleArg) -> Tensor:
        """Logits for z at the prior mean."""
        return self.combine(self.backbone(x), self.prior_encode(x, styles).mean)
