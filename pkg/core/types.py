"""Domain types shared by every module, plus style encoding and splitting.

Images are float arrays in [0, 1] laid out channel-first (C, H, W); masks
are uint8 {0, 1} grids (H, W). All types are treated as immutable values
once constructed.
"""

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import settings


class InvalidStyleError(ValueError):
    """A label style id outside {0, ..., num_styles - 1}."""


@dataclass(frozen=True)
class LabelStyle:
    """Discrete annotation style l; style 0 is the fine ground-truth style."""

    id: int
    num_styles: int

    def __post_init__(self):
        if self.num_styles < 1:
            raise InvalidStyleError(f"num_styles must be >= 1, got {self.num_styles}")
        if not 0 <= self.id < self.num_styles:
            raise InvalidStyleError(
                f"style id {self.id} out of range for {self.num_styles} styles")


@dataclass(frozen=True, eq=False)
class SegmentationMask:
    """Binary H x W mask."""

    grid: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid)
        if grid.ndim != 2 or 0 in grid.shape:
            raise ValueError(f"mask must be a non-empty 2-D grid, got shape {grid.shape}")
        if not np.isin(grid, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        object.__setattr__(self, "grid", grid.astype(np.uint8))

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def area(self) -> int:
        return int(self.grid.sum())


@dataclass(frozen=True, eq=False)
class AnnotatedSample:
    """One image with k >= 1 (mask, style) annotations.

    Several annotations may share a style. `truth` is only set for
    synthetic data, where the real object boundary is known.
    """

    image: np.ndarray
    annotations: Tuple[Tuple[SegmentationMask, LabelStyle], ...]
    sample_id: str
    metadata: Dict = field(default_factory=dict)
    truth: Optional[np.ndarray] = None

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float32)
        if image.ndim == 2:
            image = image[None]
        if image.ndim != 3:
            raise ValueError(f"image must be (C, H, W), got shape {image.shape}")
        if image.size and (image.min() < 0.0 or image.max() > 1.0):
            raise ValueError(f"{self.sample_id}: image values must lie in [0, 1]")
        object.__setattr__(self, "image", image)
        annotations = tuple(self.annotations)
        if not annotations:
            raise ValueError(f"{self.sample_id}: at least one annotation is required")
        for mask, _ in annotations:
            if mask.grid.shape != image.shape[1:]:
                raise ValueError(
                    f"{self.sample_id}: annotation shape {mask.grid.shape} does not "
                    f"match image shape {image.shape[1:]}")
        object.__setattr__(self, "annotations", annotations)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.image.shape[1], self.image.shape[2]

    @property
    def channels(self) -> int:
        return self.image.shape[0]

    def masks_of_style(self, style: int) -> List[SegmentationMask]:
        return [m for m, s in self.annotations if s.id == style]

    @property
    def styles(self) -> List[int]:
        return sorted({s.id for _, s in self.annotations})


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    """Disjoint train/val/test partition of the samples by sample_id."""

    train: Tuple[AnnotatedSample, ...]
    val: Tuple[AnnotatedSample, ...]
    test: Tuple[AnnotatedSample, ...]
    ratios: Tuple[float, float, float] = settings.SPLIT_RATIOS
    seed: int = 0

    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def pair_counts(self, style: Optional[int] = None) -> Tuple[int, int, int]:
        """Image-annotation pairs per split, optionally for one style."""
        return (count_pairs(self.train, style), count_pairs(self.val, style),
                count_pairs(self.test, style))

    def membership(self) -> Dict[str, str]:
        out = {}
        for name in ("train", "val", "test"):
            for s in getattr(self, name):
                out[s.sample_id] = name
        return out

    @classmethod
    def from_membership(cls, samples: Sequence[AnnotatedSample],
                        membership: Dict[str, str], seed: int = 0) -> "DatasetSplit":
        parts = {"train": [], "val": [], "test": []}
        for s in samples:
            if s.sample_id not in membership:
                raise ValueError(f"sample {s.sample_id} has no split assignment")
            parts[membership[s.sample_id]].append(s)
        return cls(tuple(parts["train"]), tuple(parts["val"]),
                   tuple(parts["test"]), seed=seed)


def one_hot_tile(style: LabelStyle, height: int, width: int) -> np.ndarray:
    """(num_styles, H, W) block with plane `style.id` set to ones."""
    if height <= 0 or width <= 0:
        raise ValueError(f"tile size must be positive, got {height}x{width}")
    if not 0 <= style.id < style.num_styles:
        raise InvalidStyleError(
            f"style id {style.id} out of range for {style.num_styles} styles")
    block = np.zeros((style.num_styles, height, width), dtype=np.float32)
    block[style.id] = 1.0
    return block


def concat_style(image: np.ndarray, block: np.ndarray) -> np.ndarray:
    """Append the style planes to the channel axis; image channels unchanged."""
    image = np.asarray(image)
    block = np.asarray(block)
    if image.ndim != 3 or block.ndim != 3:
        raise ValueError("image and style block must both be (C, H, W)")
    if image.shape[1:] != block.shape[1:]:
        raise ValueError(
            f"style block spatial dims {block.shape[1:]} do not match "
            f"image dims {image.shape[1:]}")
    return np.concatenate([image, block.astype(image.dtype)], axis=0)


def split_dataset(samples: Sequence[AnnotatedSample],
                  ratios: Tuple[float, float, float] = settings.SPLIT_RATIOS,
                  seed: int = 0) -> DatasetSplit:
    """Seeded random split of whole images into train/val/test.

    Train and validation sizes are floor(n * ratio); the test split takes the
    remainder, so 651 images split 390/130/131.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    ids = [s.sample_id for s in samples]
    if len(set(ids)) != len(ids):
        raise ValueError("sample ids must be unique")
    n = len(samples)
    n_train = int(np.floor(n * ratios[0] + 1e-9))
    n_val = int(np.floor(n * ratios[1] + 1e-9))
    n_test = n - n_train - n_val
    if n < 5 or min(n_train, n_val, n_test) < 1:
        raise ValueError(f"{n} samples are too few for a three-way split with ratios {ratios}")

    # sort first so the result does not depend on input order
    ordered = sorted(samples, key=lambda s: s.sample_id)
    perm = np.random.default_rng(seed).permutation(n)
    shuffled = [ordered[i] for i in perm]
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        val=tuple(shuffled[n_train:n_train + n_val]),
        test=tuple(shuffled[n_train + n_val:]),
        ratios=tuple(ratios),
        seed=seed,
    )


def count_pairs(samples: Sequence[AnnotatedSample], style: Optional[int] = None) -> int:
    return sum(1 for s in samples for _, l in s.annotations
               if style is None or l.id == style)


def styles_present(samples: Sequence[AnnotatedSample]) -> List[int]:
    return sorted({l.id for s in samples for _, l in s.annotations})


def style_frequencies(samples: Sequence[AnnotatedSample], num_styles: int) -> np.ndarray:
    """Relative frequency of each style among the annotation pairs."""
    counts = Counter(l.id for s in samples for _, l in s.annotations)
    freq = np.array([counts.get(i, 0) for i in range(num_styles)], dtype=np.float64)
    if freq.sum() == 0:
        raise ValueError("no annotations to estimate style frequencies from")
    return freq / freq.sum()


def filter_by_style(samples: Sequence[AnnotatedSample], style: int) -> List[AnnotatedSample]:
    """Samples reduced to the annotations of one style; images without it are dropped."""
    out = []
    for s in samples:
        kept = tuple((m, l) for m, l in s.annotations if l.id == style)
        if kept:
            out.append(AnnotatedSample(s.image, kept, s.sample_id, s.metadata, s.truth))
    return out


def split_digest(samples: Sequence[AnnotatedSample]) -> str:
    """Order-independent fingerprint of a set of samples."""
    h = hashlib.sha256()
    for sid in sorted(s.sample_id for s in samples):
        h.update(sid.encode())
        h.update(b"\0")
    return h.hexdigest()[:16]
