"""Single-cell crops from multi-cell microscopy frames.

Each ground-truth cell gets its smallest bounding box, extended by a
margin on all sides. Only crops whose extended box lies completely inside
the frame are kept; the rest are dropped without error.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from config import settings
from core.types import AnnotatedSample, LabelStyle, SegmentationMask
from curation.resize import resize_image, resize_mask

logger = logging.getLogger(__name__)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class CropSpec:
    """Inclusive bounding box (row_min, row_max, col_min, col_max) plus margin."""

    bbox: Tuple[int, int, int, int]
    margin: int = settings.CROP_MARGIN
    target_size: int = settings.CELL_SIZE

    @property
    def extended(self) -> Tuple[int, int, int, int]:
        r0, r1, c0, c1 = self.bbox
        m = self.margin
        return r0 - m, r1 + m, c0 - m, c1 + m

    def fits(self, shape: Tuple[int, int]) -> bool:
        r0, r1, c0, c1 = self.extended
        return r0 >= 0 and c0 >= 0 and r1 <= shape[0] - 1 and c1 <= shape[1] - 1

    def crop(self, array: np.ndarray) -> np.ndarray:
        """Cut the extended box out of an (H, W) or (C, H, W) array."""
        shape = array.shape[-2:]
        if not self.fits(shape):
            raise ValueError(f"extended box {self.extended} leaves frame of shape {shape}")
        r0, r1, c0, c1 = self.extended
        return array[..., r0:r1 + 1, c0:c1 + 1]


def crop_to_spec(array: np.ndarray, spec: CropSpec, kind: str = "image") -> np.ndarray:
    """Crop and resize to the CropSpec's target size."""
    patch = spec.crop(np.asarray(array))
    size = spec.target_size
    if kind == "mask":
        return resize_mask(patch, size)
    if kind == "image":
        return resize_image(patch if patch.ndim == 3 else patch[None], size)
    raise ValueError(f"kind must be 'image' or 'mask', got {kind!r}")


def instance_masks(mask: np.ndarray) -> List[np.ndarray]:
    """Per-cell binary masks of one frame.

    Binary frames are split into 8-connected components; label images use
    their own labels.
    """
    mask = np.asarray(mask)
    if mask.max() <= 1:
        labels, n = ndimage.label(mask > 0, structure=_EIGHT_CONNECTED)
        ids = range(1, n + 1)
    else:
        labels = mask
        ids = [int(v) for v in np.unique(mask) if v != 0]
    return [(labels == i).astype(np.uint8) for i in ids]


def bounding_box(mask: np.ndarray) -> Tuple[int, int, int, int]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValueError("empty mask has no bounding box")
    return int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1])


def _overlapping_components(mask_patch: np.ndarray, cell_patch: np.ndarray) -> np.ndarray:
    """Components of an annotator's crop that touch the target cell."""
    labels, _ = ndimage.label(mask_patch > 0, structure=_EIGHT_CONNECTED)
    keep = np.unique(labels[(cell_patch > 0) & (labels > 0)])
    return np.isin(labels, keep[keep > 0]).astype(np.uint8)


def curate_cell_crops(full_images: Sequence[np.ndarray],
                      gt_masks: Sequence[np.ndarray],
                      margin: int = settings.CROP_MARGIN,
                      target: int = settings.CELL_SIZE,
                      extra_annotations: Optional[Dict[str, Sequence[np.ndarray]]] = None,
                      style_assignment: Optional[Dict[str, int]] = None,
                      num_styles: int = 2) -> List[AnnotatedSample]:
    """One AnnotatedSample per cell whose extended box fits the frame.

    The ground-truth mask becomes a style-0 annotation. Extra annotators'
    full-frame masks are cut with the same box, restricted to the
    components touching the cell and tagged with their assigned style.

    Args:
        full_images: Frames, (H, W) or (C, H, W)
        gt_masks: Label images (or binary masks split into components) aligned with the frames
        margin: Pixels added on every side of a cell's bounding box
        target: Side length crops are resized to
        extra_annotations: Annotator name -> one binary mask per frame
        style_assignment: Annotator name -> style id; needed for every extra annotator
        num_styles: Size of the style vocabulary

    Returns:
        Samples in frame order, then label order within a frame
    """
    if len(full_images) != len(gt_masks):
        raise ValueError(f"{len(full_images)} frames but {len(gt_masks)} masks")
    extra_annotations = extra_annotations or {}
    style_assignment = style_assignment or {}
    missing = set(extra_annotations) - set(style_assignment)
    if missing:
        raise ValueError(f"annotators without a style assignment: {sorted(missing)}")

    samples, dropped = [], 0
    for f, (frame, labels) in enumerate(zip(full_images, gt_masks)):
        frame = np.asarray(frame, dtype=np.float32)
        frame = frame[None] if frame.ndim == 2 else frame
        if frame.shape[1:] != np.asarray(labels).shape:
            raise ValueError(f"frame {f}: image {frame.shape[1:]} and mask "
                             f"{np.asarray(labels).shape} differ in size")
        for k, cell in enumerate(instance_masks(labels)):
            spec = CropSpec(bounding_box(cell), margin, target)
            if not spec.fits(cell.shape):
                dropped += 1
                continue
            cell_patch = spec.crop(cell)
            anns = [(SegmentationMask(resize_mask(cell_patch, target)),
                     LabelStyle(0, num_styles))]
            for name, masks in extra_annotations.items():
                patch = _overlapping_components(spec.crop(np.asarray(masks[f])), cell_patch)
                anns.append((SegmentationMask(resize_mask(patch, target)),
                             LabelStyle(style_assignment[name], num_styles)))
            samples.append(AnnotatedSample(
                image=crop_to_spec(frame, spec, "image"),
                annotations=tuple(anns),
                sample_id=f"f{f:03d}_c{k:03d}",
                metadata={"frame": f, "bbox": list(spec.bbox), "margin": margin},
            ))
    logger.info("kept %d cell crops, dropped %d touching the frame border",
                len(samples), dropped)
    return samples
