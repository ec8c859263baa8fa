"""Resizing that keeps masks binary: bilinear for images, nearest for masks."""

import numpy as np
from PIL import Image


def resize_image(image: np.ndarray, height: int, width: int = None) -> np.ndarray:
    """Bilinear resize of a (C, H, W) float image, channel by channel."""
    width = width or height
    image = np.asarray(image, dtype=np.float32)
    if image.shape[1:] == (height, width):
        return image.copy()
    planes = [np.asarray(Image.fromarray(np.ascontiguousarray(c))
                         .resize((width, height), Image.Resampling.BILINEAR))
              for c in image]
    return np.clip(np.stack(planes), 0.0, 1.0).astype(np.float32)


def resize_mask(mask: np.ndarray, height: int, width: int = None) -> np.ndarray:
    """Nearest-neighbour resize of a binary (H, W) mask."""
    width = width or height
    mask = (np.asarray(mask) > 0).astype(np.uint8)
    if mask.shape == (height, width):
        return mask.copy()
    out = Image.fromarray(mask).resize((width, height), Image.Resampling.NEAREST)
    return (np.asarray(out) > 0).astype(np.uint8)
