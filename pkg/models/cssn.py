"""Style-conditioned stochastic segmentation network.

The backbone features, with the tiled style planes appended, feed three
1x1 convolution heads giving the mean, the diagonal and the low-rank
factor of a Gaussian over the whole logit field.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn.functional as F
from torch import nn, Tensor
from torch.distributions import LowRankMultivariateNormal

from config import settings
from core.generators import make_generator
from core.registry import model_registry
from models.base_model import ModelSettings, SegmentationModel, StyleArg
from models.conditioning import StyleEncoder
from models.cprob_unet import check_binary
from models.unet import UNetBackbone

# largest pixel count for which the dense covariance may be assembled
MAX_DENSE_PIXELS = 4096


@dataclass(frozen=True, eq=False)
class LowRankGaussianLogits:
    """N(mean, diag(diag) + factor factor^T) over flattened logit fields.

    mean and diag are (B, M); factor is (B, M, r) with r possibly 0.
    """

    mean: Tensor
    diag: Tensor
    factor: Tensor
    shape: Tuple[int, int]

    def __post_init__(self):
        if self.mean.shape != self.diag.shape or self.factor.shape[:2] != self.mean.shape:
            raise ValueError(f"inconsistent shapes: mean {tuple(self.mean.shape)}, "
                             f"diag {tuple(self.diag.shape)}, factor {tuple(self.factor.shape)}")
        if self.mean.shape[1] != self.shape[0] * self.shape[1]:
            raise ValueError(f"{self.mean.shape[1]} pixels do not fill a {self.shape} field")
        if not bool((self.diag > 0).all()):
            raise ValueError("diagonal variances must be strictly positive")

    @property
    def rank(self) -> int:
        return self.factor.shape[-1]

    @property
    def num_pixels(self) -> int:
        return self.mean.shape[1]

    def rsample(self, n: int, generator: Optional[torch.Generator] = None,
                noise: Optional[Tuple[Tensor, Tensor]] = None) -> Tensor:
        """(n, B, M) draws eta = mu + sqrt(D) * eps1 + P eps2.

        `noise` replaces the standard-normal draws (eps1 of shape (n, B, M),
        eps2 of shape (n, B, r)).
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        if noise is None:
            kw = dict(generator=generator, dtype=self.mean.dtype, device=self.mean.device)
            eps1 = torch.randn((n, *self.mean.shape), **kw)
            eps2 = torch.randn((n, self.mean.shape[0], self.rank), **kw)
        else:
            eps1, eps2 = noise
        eta = self.mean + self.diag.sqrt() * eps1
        if self.rank:
            eta = eta + torch.einsum("bmr,nbr->nbm", self.factor, eps2)
        return eta

    def covariance(self) -> Tensor:
        """Dense (B, M, M) covariance; only for small fields."""
        if self.num_pixels > MAX_DENSE_PIXELS:
            raise ValueError(f"refusing to assemble a dense covariance over "
                             f"{self.num_pixels} > {MAX_DENSE_PIXELS} pixels")
        return torch.diag_embed(self.diag) + self.factor @ self.factor.transpose(-1, -2)

    def to_torch(self) -> LowRankMultivariateNormal:
        if not self.rank:
            raise ValueError("torch's low-rank normal needs rank >= 1")
        return LowRankMultivariateNormal(self.mean, self.factor, self.diag)


def sample_logits(dist: LowRankGaussianLogits, n: int, seed: Optional[int] = None,
                  generator: Optional[torch.Generator] = None) -> Tensor:
    """(n, B, H, W) logit fields; the same seed reproduces the same draws."""
    gen = make_generator(seed, generator, dist.mean.device)
    eta = dist.rsample(n, gen)
    return eta.reshape(n, dist.mean.shape[0], *dist.shape)


def ssn_loss_from_logits(logit_samples: Tensor, a: Tensor) -> Tensor:
    """-(logsumexp_s sum_m log p(a_m | eta_m^s)) + log S, averaged over the batch.

    logit_samples is (S, B, M), a is (B, M) in {0, 1}. No logit clipping.
    """
    check_binary(a)
    s = logit_samples.shape[0]
    target = a.to(logit_samples.dtype).expand_as(logit_samples)
    log_lik = -F.binary_cross_entropy_with_logits(logit_samples, target,
                                                  reduction="none").sum(-1)   # (S, B)
    return (-(torch.logsumexp(log_lik, dim=0) - math.log(s))).mean()


@model_registry.register("cssn")
class CSSN(SegmentationModel):
    display_name = "c-SSN"

    def __init__(self, model_settings: ModelSettings):
        super().__init__(model_settings)
        self.backbone = UNetBackbone(model_settings.backbone())
        self.style_encoder = StyleEncoder(model_settings.num_styles, model_settings.style_width,
                                          learned=model_settings.style_embedding)
        width = self.backbone.out_channels + model_settings.style_width
        self.mean_head = nn.Conv2d(width, 1, 1)
        self.diag_head = nn.Conv2d(width, 1, 1)
        self.factor_head = nn.Conv2d(width, model_settings.rank, 1) if model_settings.rank else None
        if model_settings.zero_init_heads:
            for head in (self.mean_head, self.diag_head, self.factor_head):
                if head is not None:
                    nn.init.zeros_(head.weight)
                    nn.init.zeros_(head.bias)

    def style_features(self, x: Tensor, styles: StyleArg) -> Tensor:
        styles = self.batch_styles(styles, x.shape[0])
        return self.style_encoder(self.backbone(x), styles)

    def logit_distribution(self, x: Tensor, styles: StyleArg) -> LowRankGaussianLogits:
        feats = self.style_features(x, styles)
        b, (h, w) = x.shape[0], x.shape[-2:]
        mean = self.mean_head(feats).reshape(b, -1)
        diag = F.softplus(self.diag_head(feats)).reshape(b, -1) + settings.DIAG_FLOOR
        if self.factor_head is None:
            factor = mean.new_zeros((b, h * w, 0))
        else:
            factor = self.factor_head(feats).flatten(2).transpose(1, 2)
        return LowRankGaussianLogits(mean, diag, factor, (h, w))

    def ssn_loss(self, x: Tensor, a: Tensor, styles: StyleArg,
                 mc_samples: Optional[int] = None,
                 generator: Optional[torch.Generator] = None) -> Tensor:
        check_binary(a)
        s = self.settings.mc_samples if mc_samples is None else mc_samples
        if s < 1:
            raise ValueError("at least one Monte-Carlo sample is required")
        dist = self.logit_distribution(x, styles)
        eta = dist.rsample(s, generator)
        return ssn_loss_from_logits(eta, a.reshape(x.shape[0], -1))

    def loss(self, x, a, styles, generator=None):
        return self.ssn_loss(x, a, styles, generator=generator)

    def sample_logits(self, x: Tensor, styles: StyleArg, n: int,
                      generator: Optional[torch.Generator] = None) -> Tensor:
        return sample_logits(self.logit_distribution(x, styles), n, generator=generator)

    def mean_logits(self, x: Tensor, styles: StyleArg) -> Tensor:
        dist = self.logit_distribution(x, styles)
        return dist.mean.reshape(x.shape[0], *dist.shape)
