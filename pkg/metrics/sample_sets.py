"""Sets of sampled segmentations drawn from a model's predictive distribution."""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from core.generators import make_generator
from core.types import AnnotatedSample, style_frequencies

Conditioning = Union[int, str]


@dataclass(frozen=True, eq=False)
class PredictiveSampleSet:
    """n binary masks of one shape, stored as a (n, H, W) uint8 stack.

    `conditioning` is the style id the samples were drawn for,
    "unconditioned" for baseline models or "mixture" when the style was
    itself sampled (then `styles` records the draw behind every mask).
    """

    masks: np.ndarray
    source: str
    conditioning: Conditioning
    styles: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        masks = np.asarray(self.masks)
        if masks.ndim != 3 or masks.shape[0] == 0:
            raise ValueError(f"expected a non-empty (n, H, W) stack, got shape {masks.shape}")
        if not np.isin(masks, (0, 1)).all():
            raise ValueError("sampled masks must be binary")
        object.__setattr__(self, "masks", masks.astype(np.uint8))
        if self.styles is not None and len(self.styles) != masks.shape[0]:
            raise ValueError("one style per sampled mask is required")

    @property
    def n(self) -> int:
        return self.masks.shape[0]

    @property
    def shape(self):
        return self.masks.shape[1:]

    def areas(self) -> np.ndarray:
        return self.masks.reshape(self.n, -1).sum(axis=1).astype(np.int64)

    def save(self, path) -> None:
        """Compressed archive with one mask page per sample."""
        extra = {} if self.styles is None else {"styles": np.asarray(self.styles)}
        np.savez_compressed(path, masks=self.masks, source=self.source,
                            conditioning=str(self.conditioning), **extra)

    @classmethod
    def load(cls, path) -> "PredictiveSampleSet":
        with np.load(path) as blob:
            cond = str(blob["conditioning"])
            styles = blob["styles"] if "styles" in blob.files else None
            return cls(blob["masks"], str(blob["source"]),
                       int(cond) if cond.isdigit() else cond, styles)


def check_style_probs(style_probs, num_styles: int) -> np.ndarray:
    probs = np.asarray(style_probs, dtype=np.float64)
    if probs.ndim != 1 or len(probs) != num_styles:
        raise ValueError(f"expected {num_styles} style probabilities, got {probs.tolist()}")
    if not np.isfinite(probs).all() or (probs < 0).any():
        raise ValueError(f"style probabilities must be finite and non-negative: {probs.tolist()}")
    if abs(probs.sum() - 1.0) > 1e-6:
        raise ValueError(f"style probabilities sum to {probs.sum():.6f}, not 1")
    return probs / probs.sum()


def resolve_style_probs(spec: Union[str, Sequence[float]], num_styles: int,
                        train_samples: Optional[Sequence[AnnotatedSample]] = None) -> np.ndarray:
    """"uniform" gives 1/num_styles each; "train" the training split's style frequencies."""
    if isinstance(spec, str):
        if spec == "uniform":
            return np.full(num_styles, 1.0 / num_styles)
        if spec == "train":
            if not train_samples:
                raise ValueError("style_probs 'train' needs the training samples")
            return style_frequencies(train_samples, num_styles)
        raise ValueError(f"unknown style_probs {spec!r}; use 'uniform', 'train' or a list")
    return check_style_probs(spec, num_styles)


def sample_full_distribution(model, x, n: int, style_probs,
                             seed: Optional[int] = None) -> PredictiveSampleSet:
    """n draws from sum_l p(l) p(y | x, l).

    Styles come from a numpy stream seeded with `seed`; predictions for each
    style are then drawn from one torch stream with the same seed, style by
    style in ascending order. With all mass on one style this reproduces
    sample_predictions(x, style, n, seed) exactly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not model.conditioned:
        return model.sample_predictions(x, None, n, seed=seed)
    probs = check_style_probs(style_probs, model.num_styles)
    styles = np.random.default_rng(seed).choice(len(probs), size=n, p=probs)

    gen = make_generator(seed, device=model.device)
    masks = None
    for style in np.unique(styles):
        where = np.flatnonzero(styles == style)
        drawn = model.sample_predictions(x, int(style), len(where), generator=gen).masks
        if masks is None:
            masks = np.zeros((n, *drawn.shape[1:]), dtype=np.uint8)
        masks[where] = drawn
    return PredictiveSampleSet(masks, model.registry_id, "mixture", styles)
