"""Label-style datasets and the dilate-and-blur coarse-annotation baseline."""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from core.types import AnnotatedSample, LabelStyle, SegmentationMask
from curation.resize import resize_image, resize_mask

logger = logging.getLogger(__name__)

DEFAULT_DILATION_RADIUS = 5
DEFAULT_BLUR_SIGMA = 2.0


def assemble_style_dataset(raw_annotations: Dict[str, Tuple[np.ndarray, Sequence[Tuple[str, np.ndarray]]]],
                           style_assignment: Dict[str, int],
                           num_styles: Optional[int] = None,
                           target_size: Optional[int] = None) -> List[AnnotatedSample]:
    """Tag every annotation with its annotator's style.

    Args:
        raw_annotations: sample id -> (image, [(annotator, mask), ...])
        style_assignment: annotator -> style id
        num_styles: Defaults to the largest assigned style + 1
        target_size: Square size to rescale images and masks to (256 for lesions)

    Images may have any number of annotations per style, including none.
    """
    if not style_assignment:
        raise ValueError("style_assignment is empty")
    num_styles = num_styles or max(style_assignment.values()) + 1
    samples = []
    for sample_id, (image, anns) in sorted(raw_annotations.items()):
        image = np.asarray(image, dtype=np.float32)
        image = image[None] if image.ndim == 2 else image
        pairs = []
        for annotator, mask in anns:
            if annotator not in style_assignment:
                raise ValueError(f"{sample_id}: annotator {annotator!r} has no style")
            mask = np.asarray(mask)
            if mask.shape != image.shape[1:]:
                raise ValueError(f"{sample_id}: annotation {annotator!r} has shape "
                                 f"{mask.shape}, image has {image.shape[1:]}")
            if target_size:
                mask = resize_mask(mask, target_size)
            pairs.append((SegmentationMask((mask > 0).astype(np.uint8)),
                          LabelStyle(style_assignment[annotator], num_styles)))
        if not pairs:
            logger.warning("%s has no annotations, skipped", sample_id)
            continue
        if target_size:
            image = resize_image(image, target_size)
        samples.append(AnnotatedSample(image, tuple(pairs), sample_id))
    logger.info("assembled %d images, %d image-annotation pairs",
                len(samples), sum(len(s.annotations) for s in samples))
    return samples


def _disk(radius: int) -> np.ndarray:
    y, x = np.ogrid[-radius:radius + 1, -radius:radius + 1]
    return x * x + y * y <= radius * radius


def dilate_blur_augment(fine_mask: np.ndarray,
                        dilation_radius: int = DEFAULT_DILATION_RADIUS,
                        sigma: float = DEFAULT_BLUR_SIGMA) -> np.ndarray:
    """Coarse-style mask from a fine one: disk dilation, Gaussian blur, threshold 0.5.

    The input mask is kept inside the result, so the area never shrinks
    and a larger radius never gives a smaller mask.
    """
    mask = np.asarray(fine_mask)
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("dilate_blur_augment expects a binary mask")
    mask = mask.astype(bool)
    if dilation_radius < 0 or sigma < 0:
        raise ValueError("dilation radius and sigma must be non-negative")
    if not mask.any():
        return np.zeros(mask.shape, dtype=np.uint8)
    out = mask
    if dilation_radius > 0:
        out = ndimage.binary_dilation(mask, structure=_disk(int(dilation_radius)))
    if sigma > 0:
        out = ndimage.gaussian_filter(out.astype(np.float64), sigma) >= 0.5
    return (out | mask).astype(np.uint8)


def dynamic_augmentation(samples: Sequence[AnnotatedSample],
                         rng: np.random.Generator,
                         dilation_radius: int = DEFAULT_DILATION_RADIUS,
                         sigma: float = DEFAULT_BLUR_SIGMA) -> List[AnnotatedSample]:
    """Replace every coarse annotation by an augmented fine one of the same image.

    When an image has several style-0 annotations one is drawn at random for
    each replacement. Images without a style-0 annotation are left as they are.
    """
    out = []
    for s in samples:
        fine = s.masks_of_style(0)
        if not fine:
            out.append(s)
            continue
        anns = []
        for mask, style in s.annotations:
            if style.id == 0:
                anns.append((mask, style))
                continue
            source = fine[int(rng.integers(len(fine)))] if len(fine) > 1 else fine[0]
            coarse = dilate_blur_augment(source.grid, dilation_radius, sigma)
            anns.append((SegmentationMask(coarse), style))
        out.append(AnnotatedSample(s.image, tuple(anns), s.sample_id, s.metadata, s.truth))
    return out
